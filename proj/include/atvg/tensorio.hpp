#pragma once

#include "atvg/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace atvg {

// ATVG matrix file: "ATVG" magic, u32 version=1, u32 rows, u32 cols
// (all little-endian), then rows*cols little-endian IEEE-754 floats, row-major.
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);
void write_feature_matrix(const FeatureMatrix& matrix,
                          const std::filesystem::path& path);

// Stream forms consume/produce exactly one matrix record; used by the blob
// container formats (checkpoints, PCA models).
FeatureMatrix read_feature_matrix(std::istream& in, const std::string& context);
void write_feature_matrix(const FeatureMatrix& matrix, std::ostream& out,
                          const std::string& context);

// Reads rows/cols without touching the payload.
std::pair<Index, Index> read_feature_matrix_shape(
    const std::filesystem::path& path);

// Source indices floor(i*rows/n) for i in [0,n); identity when n >= rows.
std::vector<Index> uniform_sample_indices(Index rows, Index n);
FeatureMatrix uniform_sample_rows(const FeatureMatrix& matrix, Index n);

// Maps a moment in sampled coordinates back to original frame indices, given
// the index map used for sampling and the original row count.
Moment unsample_moment(const Moment& m, const std::vector<Index>& indices,
                       Index original_rows);

// Inverse direction: original frame interval -> sampled coordinates. A sampled
// frame i covers [indices[i], indices[i+1]); frames whose span intersects the
// moment are included, so the result is never empty.
Moment sample_moment(const Moment& m, const std::vector<Index>& indices,
                     Index original_rows);

struct PcaModel {
  Eigen::VectorXd mean;                // d
  Eigen::MatrixXd components;          // k x d, rows orthonormal
  Eigen::VectorXd explained_variance;  // k, non-increasing

  Index dim() const { return mean.size(); }
  Index k() const { return components.rows(); }
};

// Exact eigendecomposition of the sample covariance; top-k axes with
// deterministic sign (largest-magnitude coordinate positive). Zero-variance
// eigendirections are replaced by Gram-Schmidt completion against the
// canonical basis so rank-deficient input still yields orthonormal axes.
PcaModel pca_fit(const FeatureMatrix& matrix, Index k);

// Centered projections (x - mean) * components^T, rows x k.
FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& matrix);

// x_hat = mean + y * components, rows x d.
FeatureMatrix pca_inverse_transform(const PcaModel& model,
                                    const FeatureMatrix& reduced);

void write_pca_model(const PcaModel& model, const std::filesystem::path& path);
PcaModel read_pca_model(const std::filesystem::path& path);

}  // namespace atvg
