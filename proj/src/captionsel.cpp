#include "atvg/captionsel.hpp"

#include "atvg/grounding.hpp"
#include "atvg/rng.hpp"
#include "atvg/tensorio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atvg {

std::vector<ScoredWord> score_words(const Eigen::VectorXd& moment_vec,
                                    const std::vector<std::string>& words,
                                    const FeatureMatrix& embeddings,
                                    PosTag pos) {
  require(static_cast<Index>(words.size()) == embeddings.rows(),
          ErrorCode::DimMismatch,
          "score_words: word count does not match embedding rows");
  std::vector<ScoredWord> scored;
  scored.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double s =
        cosine(moment_vec, embeddings.row(static_cast<Index>(i)).transpose());
    scored.push_back(ScoredWord{words[i], pos, s});
  }
  return scored;
}

namespace {

// Top-n by score, ties to the earlier input position; stable by construction.
std::vector<ScoredWord> take_top(const std::vector<ScoredWord>& scored,
                                 Index n) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scored[a].score > scored[b].score;
                   });
  const std::size_t take =
      std::min<std::size_t>(scored.size(), n < 0 ? 0 : std::size_t(n));
  std::vector<ScoredWord> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(scored[order[i]]);
  return out;
}

// Uniform sample of n items without replacement, ignoring scores, then
// reordered score-descending so downstream invariants hold.
std::vector<ScoredWord> take_random(const std::vector<ScoredWord>& scored,
                                    Index n, std::uint64_t& rng) {
  std::vector<std::size_t> pool(scored.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const std::size_t take =
      std::min<std::size_t>(scored.size(), n < 0 ? 0 : std::size_t(n));
  std::vector<ScoredWord> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = uniform_index(rng, pool.size());
    out.push_back(scored[pool[static_cast<std::size_t>(j)]]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.score > b.score;
  });
  return out;
}

Index scaled_count(Index requested, double moment_len, double ref_len,
                   std::size_t available) {
  if (available == 0) return 0;
  require(ref_len > 0.0, ErrorCode::ConfigError,
          "select_topk: scaled mode needs ref_len > 0");
  const double raw = double(requested) * moment_len / ref_len;
  const auto rounded = static_cast<Index>(std::floor(raw + 0.5));  // half-up
  const Index floored = std::max<Index>(1, rounded);
  return std::min<Index>(floored, static_cast<Index>(available));
}

}  // namespace

TopkSelection select_topk(const std::vector<ScoredWord>& scored_nouns,
                          const std::vector<ScoredWord>& scored_verbs,
                          Index n1, Index n2, const SelectionMode& mode) {
  require(n1 >= 0 && n2 >= 0, ErrorCode::ConfigError,
          "select_topk: counts must be nonnegative");
  TopkSelection sel;
  switch (mode.kind) {
    case SelectionMode::Kind::Fixed:
      sel.nouns = take_top(scored_nouns, n1);
      sel.verbs = take_top(scored_verbs, n2);
      break;
    case SelectionMode::Kind::Scaled: {
      const Index en1 =
          scaled_count(n1, mode.moment_len, mode.ref_len, scored_nouns.size());
      const Index en2 =
          scaled_count(n2, mode.moment_len, mode.ref_len, scored_verbs.size());
      sel.nouns = take_top(scored_nouns, en1);
      sel.verbs = take_top(scored_verbs, en2);
      break;
    }
    case SelectionMode::Kind::Random: {
      std::uint64_t rng = mode.seed;
      sel.nouns = take_random(scored_nouns, n1, rng);
      sel.verbs = take_random(scored_verbs, n2, rng);
      break;
    }
  }
  return sel;
}

std::string assemble_caption(const std::vector<ScoredWord>& nouns,
                             const std::vector<ScoredWord>& verbs) {
  require(!nouns.empty() || !verbs.empty(), ErrorCode::EmptyCaption,
          "assemble_caption: no tokens");
  std::string caption;
  for (const auto* group : {&nouns, &verbs}) {
    for (const auto& w : *group) {
      if (!caption.empty()) caption += ' ';
      caption += w.token;
    }
  }
  return caption;
}

nlohmann::json CmgConfig::to_json() const {
  const char* strategy_name = "random";
  switch (strategy.kind) {
    case SelectionStrategy::Kind::Random: strategy_name = "random"; break;
    case SelectionStrategy::Kind::Longest: strategy_name = "longest"; break;
    case SelectionStrategy::Kind::Distinct: strategy_name = "distinct"; break;
    case SelectionStrategy::Kind::MaxSimilarity:
      strategy_name = "max-similarity";
      break;
    case SelectionStrategy::Kind::PerfectBoundary:
      strategy_name = "perfect-boundary";
      break;
    case SelectionStrategy::Kind::PerfectAlignment:
      strategy_name = "perfect-alignment";
      break;
  }
  const char* mode_name = "fixed";
  if (word_mode == SelectionMode::Kind::Scaled) mode_name = "scaled";
  if (word_mode == SelectionMode::Kind::Random) mode_name = "random";
  return nlohmann::json{{"seed", seed},
                        {"sample_budget", sample_budget},
                        {"k", k},
                        {"index_weight", index_weight},
                        {"strategy", strategy_name},
                        {"n1", n1},
                        {"n2", n2},
                        {"mode", mode_name},
                        {"all_candidates", all_candidates}};
}

std::vector<CaptionedMoment> run_cmg(const FeatureMatrix& frames,
                                     const VideoMeta& meta,
                                     const std::vector<SubtitleWord>& words,
                                     const Provider& provider,
                                     const CmgConfig& config) {
  require(frames.rows() >= 1, ErrorCode::DimZero, "run_cmg: no frames");

  const WordCandidates candidates_words = extract_candidates(words);
  require(!candidates_words.nouns.empty() || !candidates_words.verbs.empty(),
          ErrorCode::NoCandidateWords,
          meta.video_id + ": no candidate nouns or verbs");

  // Candidate moments in sampled coordinates.
  const Index budget = config.sample_budget > 0
                           ? std::min(config.sample_budget, frames.rows())
                           : frames.rows();
  const auto index_map = uniform_sample_indices(frames.rows(), budget);
  const FeatureMatrix sampled = uniform_sample_rows(frames, budget);
  require(config.k >= 1 && config.k <= sampled.rows(), ErrorCode::KTooLarge,
          meta.video_id + ": k exceeds sampled frame count");
  const FeatureMatrix augmented =
      augment_with_index(sampled, config.index_weight);
  const auto labels = kmeans(augmented, config.k, config.seed,
                             config.kmeans_max_iter, config.kmeans_tol);
  const CandidateSet candidates = labels_to_moments(labels);

  // Word embeddings, shared across candidate moments.
  const auto noun_lookup = lookup(provider, candidates_words.nouns);
  const auto verb_lookup = lookup(provider, candidates_words.verbs);
  std::vector<std::string> nouns_found, verbs_found;
  for (const auto& t : candidates_words.nouns) {
    if (std::find(noun_lookup.missing.begin(), noun_lookup.missing.end(), t) ==
        noun_lookup.missing.end()) {
      nouns_found.push_back(t);
    }
  }
  for (const auto& t : candidates_words.verbs) {
    if (std::find(verb_lookup.missing.begin(), verb_lookup.missing.end(), t) ==
        verb_lookup.missing.end()) {
      verbs_found.push_back(t);
    }
  }

  std::vector<Moment> chosen;
  if (config.all_candidates) {
    chosen = candidates.moments;
  } else {
    SelectContext ctx;
    ctx.frames = &sampled;
    Eigen::VectorXd query_vec;
    if (config.strategy.kind == SelectionStrategy::Kind::MaxSimilarity) {
      // No external query exists during generation; the candidate words
      // themselves stand in for the caption.
      FeatureMatrix all_words(noun_lookup.embeddings.rows() +
                                  verb_lookup.embeddings.rows(),
                              std::max(noun_lookup.embeddings.cols(),
                                       verb_lookup.embeddings.cols()));
      require(all_words.rows() > 0, ErrorCode::NoCandidateWords,
              meta.video_id + ": no candidate word has an embedding");
      if (noun_lookup.embeddings.rows() > 0) {
        all_words.topRows(noun_lookup.embeddings.rows()) =
            noun_lookup.embeddings;
      }
      if (verb_lookup.embeddings.rows() > 0) {
        all_words.bottomRows(verb_lookup.embeddings.rows()) =
            verb_lookup.embeddings;
      }
      query_vec = pool_rows(all_words);
      ctx.query_vec = &query_vec;
    }
    SelectionStrategy strategy = config.strategy;
    strategy.seed = config.seed ^ fnv1a64("moment-select");
    chosen.push_back(select(candidates, strategy, ctx));
  }

  const double mean_candidate_len =
      std::accumulate(candidates.moments.begin(), candidates.moments.end(), 0.0,
                      [](double acc, const Moment& m) {
                        return acc + double(m.length());
                      }) /
      double(candidates.moments.size());

  std::vector<CaptionedMoment> out;
  for (const auto& m : chosen) {
    const Eigen::VectorXd moment_vec = pool_moment(sampled, m);
    const auto scored_nouns =
        score_words(moment_vec, nouns_found, noun_lookup.embeddings,
                    PosTag::Noun);
    const auto scored_verbs =
        score_words(moment_vec, verbs_found, verb_lookup.embeddings,
                    PosTag::Verb);

    SelectionMode mode;
    mode.kind = config.word_mode;
    mode.moment_len = double(m.length());
    mode.ref_len = config.scaled_ref_len.value_or(mean_candidate_len);
    mode.seed = config.seed ^ fnv1a64("word-select") ^
                (std::uint64_t(m.start) << 32 | std::uint64_t(m.end));
    const TopkSelection sel =
        select_topk(scored_nouns, scored_verbs, config.n1, config.n2, mode);

    CaptionedMoment cm;
    cm.video_id = meta.video_id;
    cm.moment = unsample_moment(m, index_map, frames.rows());
    cm.caption = assemble_caption(sel.nouns, sel.verbs);
    cm.tokens = sel.nouns;
    cm.tokens.insert(cm.tokens.end(), sel.verbs.begin(), sel.verbs.end());
    cm.meta = config;
    out.push_back(std::move(cm));
  }
  return out;
}

nlohmann::json captioned_moment_to_json(const CaptionedMoment& cm,
                                        const VideoMeta& meta) {
  const Interval t = frames_to_interval(cm.moment, meta);
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& w : cm.tokens) {
    tokens.push_back({{"token", w.token},
                      {"pos", pos_tag_name(w.pos)},
                      {"score", w.score}});
  }
  return nlohmann::json{{"video_id", cm.video_id},
                        {"start_frame", cm.moment.start},
                        {"end_frame", cm.moment.end},
                        {"t_start_s", t.t_start},
                        {"t_end_s", t.t_end},
                        {"caption", cm.caption},
                        {"tokens", tokens},
                        {"config", cm.meta.to_json()}};
}

}  // namespace atvg
