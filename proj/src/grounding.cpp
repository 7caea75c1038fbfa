#include "atvg/grounding.hpp"

#include "atvg/tensorio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atvg {

double tiou(const Interval& a, const Interval& b) {
  require(a.t_start < a.t_end && b.t_start < b.t_end, ErrorCode::OutOfRange,
          "tiou: degenerate interval");
  const double inter = std::max(
      0.0, std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start));
  const double uni = a.length() + b.length() - inter;
  return inter / uni;
}

Interval frames_to_interval(const Moment& m, const VideoMeta& meta) {
  require(m.valid(meta.frame_count), ErrorCode::OutOfRange,
          "frames_to_interval: moment outside [0, frame_count)");
  const double scale = meta.duration_s / double(meta.frame_count);
  return Interval{double(m.start) * scale, double(m.end) * scale};
}

EvalReport evaluate(const std::vector<std::pair<Interval, Interval>>& pairs,
                    const std::vector<double>& thresholds) {
  require(!pairs.empty(), ErrorCode::EmptyEvaluation, "evaluate: no pairs");
  for (double tau : thresholds) {
    require(tau > 0.0 && tau < 1.0, ErrorCode::ConfigError,
            "evaluate: thresholds must lie in (0, 1)");
  }

  EvalReport report;
  report.n = pairs.size();
  std::map<double, std::size_t> hits;
  for (double tau : thresholds) hits[tau] = 0;

  // Kahan summation keeps miou identical whether pairs are processed in one
  // chunk or many.
  double sum = 0.0, comp = 0.0;
  for (const auto& [pred, gt] : pairs) {
    const double v = tiou(pred, gt);
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    for (double tau : thresholds) {
      if (v > tau) ++hits[tau];
    }
  }
  for (double tau : thresholds) {
    report.recall[tau] = double(hits[tau]) / double(pairs.size());
  }
  report.miou = sum / double(pairs.size());
  return report;
}

GroundResult ground_query(const FeatureMatrix& frames, const VideoMeta& meta,
                          const std::vector<std::string>& query_tokens,
                          const Provider& provider, const GroundConfig& gen) {
  require(frames.rows() >= 1, ErrorCode::DimZero, "ground_query: no frames");
  require(meta.frame_count == frames.rows(), ErrorCode::DimMismatch,
          "ground_query: meta.frame_count does not match feature rows");

  const auto looked = lookup(provider, query_tokens);
  require(looked.embeddings.rows() >= 1, ErrorCode::NoResolvableTokens,
          "ground_query: no query token has an embedding");
  const Eigen::VectorXd query_vec = pool_rows(looked.embeddings);

  // Candidate generation in sampled coordinates, reported in original ones.
  const Index budget = gen.sample_budget > 0
                           ? std::min(gen.sample_budget, frames.rows())
                           : frames.rows();
  const auto index_map = uniform_sample_indices(frames.rows(), budget);
  const FeatureMatrix sampled = uniform_sample_rows(frames, budget);
  const FeatureMatrix augmented = augment_with_index(sampled, gen.index_weight);
  const Index k = std::min(gen.k, sampled.rows());
  const auto labels =
      kmeans(augmented, k, gen.seed, gen.kmeans_max_iter, gen.kmeans_tol);
  const CandidateSet candidates = labels_to_moments(labels);

  GroundResult result;
  result.similarity = -std::numeric_limits<double>::infinity();
  for (const auto& m : candidates.moments) {
    const double sim = cosine(pool_moment(sampled, m), query_vec);
    const Moment original = unsample_moment(m, index_map, frames.rows());
    result.diagnostics.push_back(CandidateScore{original, sim});
    const bool better =
        sim > result.similarity ||
        (sim == result.similarity &&
         (original.start < result.moment.start ||
          (original.start == result.moment.start &&
           original.length() < result.moment.length())));
    if (result.diagnostics.size() == 1 || better) {
      result.moment = original;
      result.similarity = sim;
    }
  }
  result.interval = frames_to_interval(result.moment, meta);
  return result;
}

}  // namespace atvg
