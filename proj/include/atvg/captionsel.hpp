#pragma once

#include "atvg/embed.hpp"
#include "atvg/lexemes.hpp"
#include "atvg/momentgen.hpp"
#include "atvg/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace atvg {

struct ScoredWord {
  std::string token;
  PosTag pos = PosTag::Noun;
  double score = 0.0;
};

// Word selection count policy.
struct SelectionMode {
  enum class Kind { Fixed, Scaled, Random };
  Kind kind = Kind::Fixed;
  double moment_len = 0.0;  // Scaled
  double ref_len = 0.0;     // Scaled
  std::uint64_t seed = 0;   // Random
};

// One score per word, cosine against the pooled moment feature, input order
// preserved.
std::vector<ScoredWord> score_words(const Eigen::VectorXd& moment_vec,
                                    const std::vector<std::string>& words,
                                    const FeatureMatrix& embeddings,
                                    PosTag pos);

struct TopkSelection {
  std::vector<ScoredWord> nouns;  // score-descending
  std::vector<ScoredWord> verbs;  // score-descending
};

TopkSelection select_topk(const std::vector<ScoredWord>& scored_nouns,
                          const std::vector<ScoredWord>& scored_verbs,
                          Index n1, Index n2, const SelectionMode& mode);

// Nouns then verbs, each score-descending, single-space joined.
std::string assemble_caption(const std::vector<ScoredWord>& nouns,
                             const std::vector<ScoredWord>& verbs);

struct CmgConfig {
  std::uint64_t seed = 0;
  Index sample_budget = 500;
  Index k = 4;
  double index_weight = 1.0;
  SelectionStrategy strategy{SelectionStrategy::Kind::Random, 0};
  Index n1 = 5;
  Index n2 = 3;
  SelectionMode::Kind word_mode = SelectionMode::Kind::Fixed;
  bool all_candidates = false;
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  // Scaled mode reference length; default = mean candidate length.
  std::optional<double> scaled_ref_len;

  nlohmann::json to_json() const;
};

struct CaptionedMoment {
  std::string video_id;
  Moment moment;  // original frame indices
  std::vector<ScoredWord> tokens;  // nouns then verbs, score-descending
  std::string caption;
  CmgConfig meta;
};

// Full captioned-moment pipeline: sample -> index-augment -> k-means ->
// runs-to-moments -> select -> pool -> score words -> top-k -> caption.
std::vector<CaptionedMoment> run_cmg(const FeatureMatrix& frames,
                                     const VideoMeta& meta,
                                     const std::vector<SubtitleWord>& words,
                                     const Provider& provider,
                                     const CmgConfig& config);

nlohmann::json captioned_moment_to_json(const CaptionedMoment& cm,
                                        const VideoMeta& meta);

}  // namespace atvg
