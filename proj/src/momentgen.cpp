#include "atvg/momentgen.hpp"

#include "atvg/embed.hpp"
#include "atvg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atvg {

FeatureMatrix augment_with_index(const FeatureMatrix& frames, double weight) {
  require(frames.rows() >= 1, ErrorCode::DimZero,
          "augment_with_index: no frames");
  require(weight >= 0.0, ErrorCode::ConfigError,
          "augment_with_index: weight must be nonnegative");
  const Index p = frames.rows();
  FeatureMatrix out(p, frames.cols() + 1);
  for (Index i = 0; i < p; ++i) {
    const Eigen::VectorXd row = frames.row(i).cast<double>();
    const double norm = row.norm();
    // Zero rows stay zero; nothing meaningful to normalize.
    out.row(i).head(frames.cols()) =
        (norm > 0.0 ? (row / norm).eval() : row).cast<float>();
    const double pos = p == 1 ? 0.0 : double(i) / double(p - 1);
    out(i, frames.cols()) = static_cast<float>(weight * pos);
  }
  return out;
}

namespace {

// Squared distance from every point to its nearest chosen center.
void update_min_dist2(const Eigen::MatrixXd& points,
                      const Eigen::VectorXd& center,
                      Eigen::VectorXd& min_dist2) {
  const Eigen::VectorXd d2 =
      (points.rowwise() - center.transpose()).rowwise().squaredNorm();
  min_dist2 = min_dist2.cwiseMin(d2);
}

Eigen::MatrixXd kmeans_plusplus_init(const Eigen::MatrixXd& points, Index k,
                                     std::uint64_t& rng) {
  const Index n = points.rows();
  Eigen::MatrixXd centers(k, points.cols());
  const Index first =
      static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  centers.row(0) = points.row(first);

  Eigen::VectorXd min_dist2 =
      Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  update_min_dist2(points, centers.row(0).transpose(), min_dist2);

  for (Index c = 1; c < k; ++c) {
    const double total = min_dist2.sum();
    Index pick;
    if (total <= 0.0) {
      // All points coincide with chosen centers; fall back to uniform.
      pick =
          static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    } else {
      const double u = next_unit_double(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += min_dist2(i);
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(pick);
    update_min_dist2(points, centers.row(c).transpose(), min_dist2);
  }
  return centers;
}

struct LloydRun {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  std::vector<double> objective_trace;
  double objective = 0.0;
  int iterations = 0;
};

LloydRun lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centers,
               int max_iter, double tol) {
  const Index n = points.rows();
  const Index k = centers.rows();
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);

  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment step; ties go to the lowest centroid index.
    double sse = 0.0;
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (Index c = 0; c < k; ++c) {
        const double d2 = (points.row(i) - centers.row(c)).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_c = static_cast<int>(c);
        }
      }
      run.labels[static_cast<std::size_t>(i)] = best_c;
      sse += best;
    }
    run.objective_trace.push_back(sse);
    run.objective = sse;
    run.iterations = iter + 1;

    // Update step.
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Index i = 0; i < n; ++i) {
      next.row(run.labels[static_cast<std::size_t>(i)]) += points.row(i);
      counts(run.labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    std::vector<bool> stolen(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        next.row(c) /= counts(c);
      } else {
        // Empty cluster: seize the point farthest from its centroid. Each
        // empty cluster must take a distinct point or centroids duplicate.
        Index worst = -1;
        double worst_d2 = -1.0;
        for (Index i = 0; i < n; ++i) {
          if (stolen[static_cast<std::size_t>(i)]) continue;
          const double d2 =
              (points.row(i) -
               centers.row(run.labels[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d2 > worst_d2) {
            worst_d2 = d2;
            worst = i;
          }
        }
        if (worst >= 0) {
          stolen[static_cast<std::size_t>(worst)] = true;
          next.row(c) = points.row(worst);
        } else {
          next.row(c) = centers.row(c);
        }
      }
    }

    const double shift = (next - centers).rowwise().norm().maxCoeff();
    centers = std::move(next);
    if (shift < tol) break;
  }

  // Final assignment against the settled centroids so labels and objective
  // match what we return.
  double sse = 0.0;
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (Index c = 0; c < k; ++c) {
      const double d2 = (points.row(i) - centers.row(c)).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_c = static_cast<int>(c);
      }
    }
    run.labels[static_cast<std::size_t>(i)] = best_c;
    sse += best;
  }
  run.objective_trace.push_back(sse);
  run.objective = sse;
  run.centroids = std::move(centers);
  return run;
}

}  // namespace

KmeansResult kmeans_full(const FeatureMatrix& points, Index k,
                         std::uint64_t seed, int max_iter, double tol,
                         int n_init) {
  const Index n = points.rows();
  require(k >= 1, ErrorCode::ConfigError, "kmeans: k must be >= 1");
  require(k <= n, ErrorCode::KTooLarge,
          "kmeans: k exceeds number of points (" + std::to_string(k) + " > " +
              std::to_string(n) + ")");
  require(n_init >= 1 && max_iter >= 1, ErrorCode::ConfigError,
          "kmeans: n_init and max_iter must be >= 1");

  const Eigen::MatrixXd pts = points.cast<double>();
  std::uint64_t rng = seed;
  LloydRun best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int run_idx = 0; run_idx < n_init; ++run_idx) {
    LloydRun run =
        lloyd(pts, kmeans_plusplus_init(pts, k, rng), max_iter, tol);
    if (run.objective < best.objective) best = std::move(run);
  }

  KmeansResult result;
  result.labels = std::move(best.labels);
  result.centroids = std::move(best.centroids);
  result.objective_trace = std::move(best.objective_trace);
  result.objective = best.objective;
  result.iterations = best.iterations;
  return result;
}

std::vector<int> kmeans(const FeatureMatrix& points, Index k,
                        std::uint64_t seed, int max_iter, double tol) {
  return kmeans_full(points, k, seed, max_iter, tol).labels;
}

CandidateSet labels_to_moments(const std::vector<int>& labels) {
  require(!labels.empty(), ErrorCode::DimZero, "labels_to_moments: no labels");
  CandidateSet set;
  set.generator = Generator::Kmeans;
  Index start = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[i - 1]) {
      set.moments.push_back(Moment{start, static_cast<Index>(i)});
      start = static_cast<Index>(i);
    }
  }
  return set;
}

CandidateSet sliding_window(Index frame_count, Index window, Index stride) {
  require(frame_count >= 1, ErrorCode::DimZero, "sliding_window: empty video");
  require(window >= 1 && stride >= 1, ErrorCode::ConfigError,
          "sliding_window: window and stride must be >= 1");
  CandidateSet set;
  set.generator = Generator::Sliding;
  for (Index s = 0; s + window <= frame_count; s += stride) {
    set.moments.push_back(Moment{s, s + window});
  }
  if (set.moments.empty()) {
    set.moments.push_back(Moment{0, frame_count});
  }
  return set;
}

CandidateSet brute_force(Index frame_count, Index min_len, Index step) {
  require(frame_count >= 1, ErrorCode::DimZero, "brute_force: empty video");
  require(min_len >= 1 && step >= 1, ErrorCode::ConfigError,
          "brute_force: min_len and step must be >= 1");
  CandidateSet set;
  set.generator = Generator::Brute;
  for (Index s = 0; s < frame_count; s += step) {
    for (Index e = s + step; e <= frame_count; e += step) {
      if (e - s >= min_len) set.moments.push_back(Moment{s, e});
    }
  }
  if (set.moments.empty()) {
    set.moments.push_back(Moment{0, frame_count});
  }
  return set;
}

double moment_tiou(const Moment& a, const Moment& b) {
  const double inter = double(std::max<Index>(
      0, std::min(a.end, b.end) - std::max(a.start, b.start)));
  const double uni = double(a.length() + b.length()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

// Earliest start, then shortest length.
bool tie_before(const Moment& a, const Moment& b) {
  if (a.start != b.start) return a.start < b.start;
  return a.length() < b.length();
}

// argmax over candidates with the shared tie rule.
template <typename Score>
Moment argmax_moment(const std::vector<Moment>& moments, Score&& score) {
  Moment best = moments.front();
  double best_score = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (const auto& m : moments) {
    const double s = score(m);
    if (first || s > best_score ||
        (s == best_score && tie_before(m, best))) {
      best = m;
      best_score = s;
      first = false;
    }
  }
  return best;
}

}  // namespace

Moment select(const CandidateSet& candidates, const SelectionStrategy& strategy,
              const SelectContext& ctx) {
  require(!candidates.moments.empty(), ErrorCode::DimZero,
          "select: empty candidate set");
  const auto& moments = candidates.moments;
  using Kind = SelectionStrategy::Kind;

  switch (strategy.kind) {
    case Kind::Random: {
      std::uint64_t rng = strategy.seed;
      const auto pick = uniform_index(rng, moments.size());
      return moments[static_cast<std::size_t>(pick)];
    }
    case Kind::Longest:
      return argmax_moment(moments,
                           [](const Moment& m) { return double(m.length()); });
    case Kind::Distinct: {
      require(ctx.frames != nullptr, ErrorCode::MissingContext,
              "select(Distinct): frames required");
      std::vector<Eigen::VectorXd> pooled;
      pooled.reserve(moments.size());
      for (const auto& m : moments) pooled.push_back(pool_moment(*ctx.frames, m));
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(pooled.front().size());
      for (const auto& v : pooled) mean += v;
      mean /= double(pooled.size());
      std::size_t i = 0;
      return argmax_moment(moments, [&](const Moment&) {
        return (pooled[i++] - mean).norm();
      });
    }
    case Kind::MaxSimilarity: {
      require(ctx.frames != nullptr && ctx.query_vec != nullptr,
              ErrorCode::MissingContext,
              "select(MaxSimilarity): frames and query_vec required");
      return argmax_moment(moments, [&](const Moment& m) {
        return cosine(pool_moment(*ctx.frames, m), *ctx.query_vec);
      });
    }
    case Kind::PerfectBoundary: {
      require(ctx.gt.has_value(), ErrorCode::MissingContext,
              "select(PerfectBoundary): gt required");
      require(ctx.frames != nullptr && ctx.query_vec != nullptr,
              ErrorCode::MissingContext,
              "select(PerfectBoundary): frames and query_vec required");
      std::vector<Moment> with_gt = moments;
      with_gt.push_back(*ctx.gt);
      return argmax_moment(with_gt, [&](const Moment& m) {
        return cosine(pool_moment(*ctx.frames, m), *ctx.query_vec);
      });
    }
    case Kind::PerfectAlignment: {
      require(ctx.gt.has_value(), ErrorCode::MissingContext,
              "select(PerfectAlignment): gt required");
      return argmax_moment(
          moments, [&](const Moment& m) { return moment_tiou(m, *ctx.gt); });
    }
  }
  throw Error(ErrorCode::ConfigError, "select: unknown strategy");
}

}  // namespace atvg
