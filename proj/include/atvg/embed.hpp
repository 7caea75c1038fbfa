#pragma once

#include "atvg/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace atvg {

struct EmbeddingStore {
  Index dim = 0;
  std::unordered_map<std::string, Eigen::VectorXf> entries;
};

// Store file pair: ATVG matrix at `path`, JSON sidecar {"dim", "tokens"} at
// `path` + ".json", tokens[i] <-> row i.
EmbeddingStore read_embedding_store(const std::filesystem::path& path);
void write_embedding_store(const EmbeddingStore& store,
                           const std::filesystem::path& path);

enum class MissingPolicy { Skip, Error };

struct ProviderConfig {
  enum class Mode { File, Http };
  Mode mode = Mode::File;
  std::string source;  // file path or endpoint base URL
  int timeout_ms = 5000;
  MissingPolicy missing_policy = MissingPolicy::Skip;
};

// A provider opened for use: file stores are loaded once and shared.
struct Provider {
  std::optional<EmbeddingStore> store;
  std::string endpoint;
  int timeout_ms = 5000;
  MissingPolicy missing_policy = MissingPolicy::Skip;

  bool is_http() const { return !endpoint.empty(); }
};

Provider open_provider(const ProviderConfig& config);

struct LookupResult {
  FeatureMatrix embeddings;  // one L2-normalized row per found token
  std::vector<std::string> missing;
};

LookupResult lookup(const Provider& provider,
                    const std::vector<std::string>& tokens);
LookupResult lookup(const ProviderConfig& config,
                    const std::vector<std::string>& tokens);
LookupResult lookup(const EmbeddingStore& store,
                    const std::vector<std::string>& tokens,
                    MissingPolicy policy);

// POST {endpoint}/embed with {"texts": [...]}; expects 200 and
// {"embeddings": [[...], ...]}, one inner array per text, uniform length.
// An empty inner array marks a text with no embedding.
std::vector<Eigen::VectorXd> http_embed(const std::string& endpoint,
                                        const std::vector<std::string>& texts,
                                        int timeout_ms = 5000);

// a.b / (|a||b|), computed in double.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a,
              const Eigen::MatrixBase<DerivedB>& b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch,
          "cosine: vectors differ in dimension");
  const Eigen::VectorXd ad = a.derived().template cast<double>().reshaped();
  const Eigen::VectorXd bd = b.derived().template cast<double>().reshaped();
  const double na = ad.norm();
  const double nb = bd.norm();
  require(na > 0.0 && nb > 0.0, ErrorCode::ZeroVector,
          "cosine: zero-norm vector");
  return ad.dot(bd) / (na * nb);
}

// Mean of frames[start, end), L2-normalized; unit norm by construction.
Eigen::VectorXd pool_moment(const FeatureMatrix& frames, const Moment& moment);

// L2-normalized mean of a set of embedding rows (query pooling).
Eigen::VectorXd pool_rows(const FeatureMatrix& rows);

}  // namespace atvg
