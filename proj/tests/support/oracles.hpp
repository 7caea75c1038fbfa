#pragma once

// Independent oracles for the test suites. None of these may call into the
// library's own linear algebra paths: the Jacobi solver is hand-rolled, the
// segmentation and partition searches are exhaustive, and the tiou oracle
// literally counts grid cells.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// Cyclic Jacobi eigenvalues of a symmetric matrix, descending. Plain nested
// vectors on purpose: no Eigen decomposition machinery involved.
inline std::vector<double> jacobi_eigenvalues(
    std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (tau >= 0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[i][p];
          const double aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a[p][i];
          const double aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

inline std::vector<std::vector<double>> covariance_of(
    const Eigen::MatrixXd& x) {
  const std::size_t rows = std::size_t(x.rows());
  const std::size_t d = std::size_t(x.cols());
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(Eigen::Index(i), Eigen::Index(j));
  }
  for (auto& m : mean) m /= double(rows);
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t p = 0; p < d; ++p) {
      const double dp = x(Eigen::Index(i), Eigen::Index(p)) - mean[p];
      for (std::size_t q = 0; q < d; ++q) {
        const double dq = x(Eigen::Index(i), Eigen::Index(q)) - mean[q];
        cov[p][q] += dp * dq;
      }
    }
  }
  for (auto& row : cov) {
    for (auto& v : row) v /= double(rows - 1);
  }
  return cov;
}

// Within-cluster SSE of one contiguous block [s, e).
inline double block_sse(const Eigen::MatrixXd& pts, Eigen::Index s,
                        Eigen::Index e) {
  const Eigen::RowVectorXd mean = pts.middleRows(s, e - s).colwise().mean();
  return (pts.middleRows(s, e - s).rowwise() - mean).squaredNorm();
}

// Minimal SSE over every split of P rows into k contiguous non-empty blocks.
inline double best_contiguous_sse(const Eigen::MatrixXd& pts, int k,
                                  std::vector<Eigen::Index>* best_bounds =
                                      nullptr) {
  const Eigen::Index p = pts.rows();
  std::vector<Eigen::Index> bounds(std::size_t(k) + 1);
  bounds.front() = 0;
  bounds.back() = p;
  std::vector<Eigen::Index> best(bounds);
  double best_sse = std::numeric_limits<double>::infinity();

  // Recursive enumeration of interior boundaries.
  const auto recurse = [&](auto&& self, int level) -> void {
    if (level == k) {
      double sse = 0.0;
      for (int b = 0; b < k; ++b) {
        sse += block_sse(pts, bounds[std::size_t(b)], bounds[std::size_t(b) + 1]);
      }
      if (sse < best_sse) {
        best_sse = sse;
        best = bounds;
      }
      return;
    }
    for (Eigen::Index cut = bounds[std::size_t(level) - 1] + 1;
         cut + (k - level) <= p; ++cut) {
      bounds[std::size_t(level)] = cut;
      self(self, level + 1);
    }
  };
  recurse(recurse, 1);
  if (best_bounds != nullptr) *best_bounds = best;
  return best_sse;
}

// Minimal SSE over every 2-partition (not necessarily contiguous); n <= 20.
inline double best_two_partition_sse(const Eigen::MatrixXd& pts) {
  const int n = int(pts.rows());
  double best = std::numeric_limits<double>::infinity();
  // Point 0 pinned to side A halves the search space.
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    Eigen::RowVectorXd sum_a = Eigen::RowVectorXd::Zero(pts.cols());
    Eigen::RowVectorXd sum_b = Eigen::RowVectorXd::Zero(pts.cols());
    int na = 1, nb = 0;
    sum_a += pts.row(0);
    for (int i = 1; i < n; ++i) {
      if (mask & (1u << (i - 1))) {
        sum_a += pts.row(i);
        ++na;
      } else {
        sum_b += pts.row(i);
        ++nb;
      }
    }
    if (nb == 0) continue;
    const Eigen::RowVectorXd mean_a = sum_a / double(na);
    const Eigen::RowVectorXd mean_b = sum_b / double(nb);
    double sse = 0.0;
    sse += (pts.row(0) - mean_a).squaredNorm();
    for (int i = 1; i < n; ++i) {
      if (mask & (1u << (i - 1))) {
        sse += (pts.row(i) - mean_a).squaredNorm();
      } else {
        sse += (pts.row(i) - mean_b).squaredNorm();
      }
    }
    best = std::min(best, sse);
  }
  return best;
}

// tIoU by literally counting millisecond cells; inputs are cell indices.
inline double tiou_count_ms(std::int64_t a_start, std::int64_t a_end,
                            std::int64_t b_start, std::int64_t b_end) {
  const std::int64_t lo = std::min(a_start, b_start);
  const std::int64_t hi = std::max(a_end, b_end);
  std::int64_t inter = 0, uni = 0;
  for (std::int64_t t = lo; t < hi; ++t) {
    const bool in_a = t >= a_start && t < a_end;
    const bool in_b = t >= b_start && t < b_end;
    if (in_a && in_b) ++inter;
    if (in_a || in_b) ++uni;
  }
  return uni > 0 ? double(inter) / double(uni) : 0.0;
}

}  // namespace oracle
