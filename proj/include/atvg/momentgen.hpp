#pragma once

#include "atvg/types.hpp"

#include <optional>
#include <vector>

namespace atvg {

enum class Generator { Kmeans, Sliding, Brute };

struct CandidateSet {
  std::vector<Moment> moments;
  Generator generator = Generator::Kmeans;
};

// L2-normalizes each row, then appends weight * i/(P-1) as one extra column
// (0 when P == 1). weight = 0 disables the positional signal.
FeatureMatrix augment_with_index(const FeatureMatrix& frames, double weight);

struct KmeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;             // k x d
  std::vector<double> objective_trace;   // per-iteration SSE of the best run
  double objective = 0.0;
  int iterations = 0;
};

// Lloyd's algorithm, k-means++ seeding, n_init restarts (best objective
// wins); deterministic for fixed (points, k, seed). The restart count keeps
// near-tied optima (quantization-level SSE gaps) from depending on one init.
KmeansResult kmeans_full(const FeatureMatrix& points, Index k,
                         std::uint64_t seed, int max_iter = 100,
                         double tol = 1e-6, int n_init = 32);
std::vector<int> kmeans(const FeatureMatrix& points, Index k,
                        std::uint64_t seed, int max_iter = 100,
                        double tol = 1e-6);

// Maximal runs of equal labels become moments; the result partitions [0, P).
CandidateSet labels_to_moments(const std::vector<int>& labels);

CandidateSet sliding_window(Index frame_count, Index window, Index stride);

// All [s, e) with s, e multiples of step, e - s >= min_len, e <= P.
// Falls back to {[0, P)} when nothing qualifies.
CandidateSet brute_force(Index frame_count, Index min_len, Index step);

struct SelectionStrategy {
  enum class Kind {
    Random,
    Longest,
    Distinct,
    MaxSimilarity,
    PerfectBoundary,
    PerfectAlignment,
  };
  Kind kind = Kind::Random;
  std::uint64_t seed = 0;
};

struct SelectContext {
  const FeatureMatrix* frames = nullptr;       // Distinct, MaxSimilarity
  const Eigen::VectorXd* query_vec = nullptr;  // MaxSimilarity, PerfectBoundary
  std::optional<Moment> gt;                    // Perfect*
};

// Picks one candidate; ties break by earliest start, then shortest length.
Moment select(const CandidateSet& candidates, const SelectionStrategy& strategy,
              const SelectContext& ctx = {});

// tIoU of two half-open frame intervals.
double moment_tiou(const Moment& a, const Moment& b);

}  // namespace atvg
