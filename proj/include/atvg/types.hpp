#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace atvg {

using Index = Eigen::Index;

// Universal numeric currency: row-major float storage, one embedding per row.
// All arithmetic on these goes through double (cast on use).
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorCode {
  BadMagic,
  Truncated,
  DimZero,
  NonFinite,
  IoFailure,
  SchemaError,
  BadTag,
  StoreUnreadable,
  HttpFailure,
  RaggedResponse,
  MissingToken,
  ZeroVector,
  DimMismatch,
  EmptyMoment,
  OutOfRange,
  KTooLarge,
  MissingContext,
  NoCandidateWords,
  EmptyCaption,
  NoResolvableTokens,
  EmptyEvaluation,
  DegenerateMask,
  UnknownVideoId,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) throw Error(code, message);
}

// Half-open frame interval [start, end) within one video.
struct Moment {
  Index start = 0;
  Index end = 0;

  Index length() const { return end - start; }
  bool valid(Index frame_count) const {
    return start >= 0 && start < end && end <= frame_count;
  }
  friend bool operator==(const Moment& a, const Moment& b) {
    return a.start == b.start && a.end == b.end;
  }
};

// Time span in seconds, closed for measure purposes.
struct Interval {
  double t_start = 0.0;
  double t_end = 0.0;

  double length() const { return t_end - t_start; }
};

struct VideoMeta {
  std::string video_id;
  double duration_s = 0.0;
  Index frame_count = 0;
};

// Stable 64-bit hash for deriving per-video RNG streams; std::hash is not
// guaranteed stable across processes.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace atvg
