#pragma once

#include "atvg/embed.hpp"
#include "atvg/rng.hpp"
#include "atvg/tvghead.hpp"
#include "atvg/types.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

using namespace atvg;

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("atvg_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline FeatureMatrix random_matrix(Index rows, Index cols, std::uint64_t seed,
                                   double scale = 1.0) {
  std::uint64_t rng = seed;
  FeatureMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = static_cast<float>(scale * (2.0 * next_unit_double(rng) - 1.0));
    }
  }
  return m;
}

inline Eigen::VectorXd random_unit_vector(Index dim, std::uint64_t& rng) {
  Eigen::VectorXd v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = next_gaussian(rng);
  return v / v.norm();
}

// Two exactly orthonormal directions derived from a seed.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> orthonormal_pair(
    Index dim, std::uint64_t seed) {
  std::uint64_t rng = seed;
  const Eigen::VectorXd u = random_unit_vector(dim, rng);
  Eigen::VectorXd v = random_unit_vector(dim, rng);
  v -= u.dot(v) * u;
  v.normalize();
  return {u, v};
}

struct PlantedVideo {
  FeatureMatrix frames;
  Moment segment;
  Eigen::VectorXd segment_dir;
  Eigen::VectorXd background_dir;
};

// One planted-segment video: segment frames lie along one unit direction,
// background frames along an orthogonal one, plus gaussian noise.
inline PlantedVideo make_planted_video(std::uint64_t seed, Index frames = 128,
                                       Moment segment = {40, 80},
                                       Index dim = 16,
                                       double noise_sigma = 0.05) {
  auto [u, v] = orthonormal_pair(dim, seed);
  std::uint64_t rng = seed ^ fnv1a64("planted-noise");
  PlantedVideo video;
  video.segment = segment;
  video.segment_dir = u;
  video.background_dir = v;
  video.frames.resize(frames, dim);
  for (Index i = 0; i < frames; ++i) {
    const bool inside = i >= segment.start && i < segment.end;
    Eigen::VectorXd row = inside ? u : v;
    for (Index j = 0; j < dim; ++j) row(j) += noise_sigma * next_gaussian(rng);
    video.frames.row(i) = row.cast<float>().transpose();
  }
  return video;
}

// Store whose tokens map to fixed vectors; dim shared.
inline EmbeddingStore make_store(
    Index dim,
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries) {
  EmbeddingStore store;
  store.dim = dim;
  for (const auto& [token, vec] : entries) {
    store.entries.emplace(token, vec.cast<float>());
  }
  return store;
}

// Regression task: gt center is a linear function of feature coordinate 0,
// coordinate 1 marks in-segment frames, the rest is noise.
inline std::vector<TrainExample> make_center_regression_dataset(
    std::uint64_t seed, std::size_t n = 200, Index frames = 64, Index dim = 8,
    double width = 0.25) {
  std::uint64_t rng = seed;
  std::vector<TrainExample> dataset;
  dataset.reserve(n);
  Eigen::VectorXd query = Eigen::VectorXd::Ones(dim);
  query.normalize();
  for (std::size_t s = 0; s < n; ++s) {
    const double x = n > 1 ? double(s) / double(n - 1) : 0.5;
    const double center = 0.2 + 0.6 * x;
    const double lo = center - width / 2.0;
    const double hi = center + width / 2.0;
    Moment gt{static_cast<Index>(std::llround(lo * double(frames))),
              static_cast<Index>(std::llround(hi * double(frames)))};
    gt.start = std::clamp<Index>(gt.start, 0, frames - 1);
    gt.end = std::clamp<Index>(gt.end, gt.start + 1, frames);

    TrainExample ex;
    ex.gt = gt;
    ex.query_vec = query;
    ex.frames.resize(frames, dim);
    for (Index i = 0; i < frames; ++i) {
      ex.frames(i, 0) = static_cast<float>(x);
      ex.frames(i, 1) = (i >= gt.start && i < gt.end) ? 1.0f : 0.0f;
      for (Index j = 2; j < dim; ++j) {
        ex.frames(i, j) = static_cast<float>(0.1 * next_gaussian(rng));
      }
    }
    dataset.push_back(std::move(ex));
  }
  return dataset;
}

}  // namespace testutil
