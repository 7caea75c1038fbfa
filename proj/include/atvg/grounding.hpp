#pragma once

#include "atvg/embed.hpp"
#include "atvg/momentgen.hpp"
#include "atvg/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace atvg {

// tIoU of two time intervals; 0 when disjoint.
double tiou(const Interval& a, const Interval& b);

// Linear frame->second map: t = index * duration_s / frame_count.
Interval frames_to_interval(const Moment& m, const VideoMeta& meta);

struct EvalReport {
  std::size_t n = 0;
  std::map<double, double> recall;  // threshold -> fraction with tIoU > tau
  double miou = 0.0;
};

// recall[tau] counts tIoU strictly larger than tau; miou uses compensated
// summation so chunked evaluation reproduces the serial result.
EvalReport evaluate(const std::vector<std::pair<Interval, Interval>>& pairs,
                    const std::vector<double>& thresholds);

struct GroundConfig {
  Index k = 4;
  double index_weight = 1.0;
  std::uint64_t seed = 0;
  Index sample_budget = 128;  // 0 = use all frames
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
};

struct CandidateScore {
  Moment moment;  // original frame indices
  double similarity = 0.0;
};

struct GroundResult {
  Interval interval;
  Moment moment;  // original frame indices
  double similarity = 0.0;
  std::vector<CandidateScore> diagnostics;
};

// Non-parametric grounder: index-augmented k-means candidates, query vector =
// normalized mean of token embeddings, argmax cosine(pooled moment, query).
GroundResult ground_query(const FeatureMatrix& frames, const VideoMeta& meta,
                          const std::vector<std::string>& query_tokens,
                          const Provider& provider, const GroundConfig& gen);

}  // namespace atvg
