#include "atvg/tensorio.hpp"

#include "atvg/blobfile.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace atvg {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'V', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
      (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  return true;
}

void check_matrix_invariants(const FeatureMatrix& m,
                             const std::string& context) {
  require(m.rows() >= 1 && m.cols() >= 1, ErrorCode::DimZero,
          context + ": matrix must have at least one row and one column");
  require(m.allFinite(), ErrorCode::NonFinite,
          context + ": matrix contains NaN or Inf");
}

}  // namespace

FeatureMatrix read_feature_matrix(std::istream& in,
                                  const std::string& context) {
  char magic[4];
  if (!in.read(magic, 4)) {
    throw Error(ErrorCode::BadMagic, context + ": file too short for magic");
  }
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, context + ": bad magic bytes");
  }
  std::uint32_t version = 0, rows = 0, cols = 0;
  if (!get_u32(in, version) || !get_u32(in, rows) || !get_u32(in, cols)) {
    throw Error(ErrorCode::BadMagic, context + ": truncated header");
  }
  if (version != kVersion) {
    throw Error(ErrorCode::BadMagic,
                context + ": unsupported version " + std::to_string(version));
  }
  require(rows != 0 && cols != 0, ErrorCode::DimZero,
          context + ": rows or cols is zero");

  FeatureMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const std::streamsize payload =
      std::streamsize(rows) * std::streamsize(cols) * 4;
  if (!in.read(reinterpret_cast<char*>(m.data()), payload) ||
      in.gcount() != payload) {
    throw Error(ErrorCode::Truncated,
                context + ": payload shorter than rows*cols*4");
  }
  // Storage is little-endian on every target we build for; floats are read
  // in place.
  require(m.allFinite(), ErrorCode::NonFinite,
          context + ": payload contains NaN or Inf");
  return m;
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::BadMagic, path.string() + ": cannot open");
  }
  return read_feature_matrix(in, path.string());
}

void write_feature_matrix(const FeatureMatrix& matrix, std::ostream& out,
                          const std::string& context) {
  check_matrix_invariants(matrix, context);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
  out.write(reinterpret_cast<const char*>(matrix.data()),
            std::streamsize(matrix.size()) * 4);
  if (!out) {
    throw Error(ErrorCode::IoFailure, context + ": write failed");
  }
}

void write_feature_matrix(const FeatureMatrix& matrix,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, path.string() + ": cannot open for write");
  }
  write_feature_matrix(matrix, out, path.string());
  out.flush();
  if (!out) {
    throw Error(ErrorCode::IoFailure, path.string() + ": flush failed");
  }
}

std::pair<Index, Index> read_feature_matrix_shape(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::BadMagic, path.string() + ": cannot open");
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, path.string() + ": bad magic bytes");
  }
  std::uint32_t version = 0, rows = 0, cols = 0;
  if (!get_u32(in, version) || !get_u32(in, rows) || !get_u32(in, cols)) {
    throw Error(ErrorCode::BadMagic, path.string() + ": truncated header");
  }
  if (version != kVersion) {
    throw Error(ErrorCode::BadMagic, path.string() + ": unsupported version");
  }
  require(rows != 0 && cols != 0, ErrorCode::DimZero,
          path.string() + ": rows or cols is zero");
  return {static_cast<Index>(rows), static_cast<Index>(cols)};
}

std::vector<Index> uniform_sample_indices(Index rows, Index n) {
  require(n >= 1, ErrorCode::ConfigError, "sample count must be >= 1");
  if (n >= rows) {
    std::vector<Index> all(static_cast<std::size_t>(rows));
    for (Index i = 0; i < rows; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    idx[static_cast<std::size_t>(i)] = (i * rows) / n;
  }
  return idx;
}

FeatureMatrix uniform_sample_rows(const FeatureMatrix& matrix, Index n) {
  if (n >= matrix.rows()) return matrix;
  const auto idx = uniform_sample_indices(matrix.rows(), n);
  FeatureMatrix out(static_cast<Index>(idx.size()), matrix.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Index>(i)) = matrix.row(idx[i]);
  }
  return out;
}

Moment unsample_moment(const Moment& m, const std::vector<Index>& indices,
                       Index original_rows) {
  const Index n = static_cast<Index>(indices.size());
  require(m.valid(n), ErrorCode::OutOfRange,
          "moment outside sampled index range");
  const Index start = indices[static_cast<std::size_t>(m.start)];
  const Index end =
      m.end == n ? original_rows : indices[static_cast<std::size_t>(m.end)];
  return Moment{start, end};
}

Moment sample_moment(const Moment& m, const std::vector<Index>& indices,
                     Index original_rows) {
  const Index n = static_cast<Index>(indices.size());
  require(m.valid(original_rows), ErrorCode::OutOfRange,
          "moment outside original frame range");
  const auto span_end = [&](Index i) {
    return i + 1 < n ? indices[static_cast<std::size_t>(i + 1)] : original_rows;
  };
  Index start = 0;
  while (start < n - 1 && span_end(start) <= m.start) ++start;
  Index end = n;
  while (end > start + 1 && indices[static_cast<std::size_t>(end - 1)] >= m.end) {
    --end;
  }
  return Moment{start, end};
}

namespace {

// Fixes eigenvector sign so the largest-magnitude coordinate is positive.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Index at = 0;
  v.cwiseAbs().maxCoeff(&at);
  if (v(at) < 0) v = -v;
}

// Completes rows [filled, k) of `axes` with canonical basis vectors
// orthogonalized against everything above them.
void gram_schmidt_complete(Eigen::MatrixXd& axes, Index filled) {
  const Index d = axes.cols();
  Index next = filled;
  for (Index e = 0; e < d && next < axes.rows(); ++e) {
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(d);
    cand(e) = 1.0;
    for (Index j = 0; j < next; ++j) {
      cand -= axes.row(j).dot(cand) * axes.row(j).transpose();
    }
    const double norm = cand.norm();
    if (norm > 1e-8) {
      cand /= norm;
      fix_sign(cand);
      axes.row(next) = cand.transpose();
      ++next;
    }
  }
  require(next == axes.rows(), ErrorCode::ConfigError,
          "failed to complete orthonormal basis");
}

}  // namespace

PcaModel pca_fit(const FeatureMatrix& matrix, Index k) {
  const Index rows = matrix.rows();
  const Index d = matrix.cols();
  require(rows >= 2, ErrorCode::DimMismatch,
          "pca_fit needs at least 2 samples");
  require(k >= 1 && k <= d, ErrorCode::DimMismatch,
          "pca_fit target dimension must be in [1, cols]");
  require(k <= rows, ErrorCode::DimMismatch,
          "pca_fit target dimension exceeds sample count");

  const Eigen::MatrixXd x = matrix.cast<double>();
  PcaModel model;
  model.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / double(rows - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorCode::ConfigError,
          "eigendecomposition did not converge");

  // Eigen returns ascending eigenvalues; take the top k in descending order.
  model.components.resize(k, d);
  model.explained_variance.resize(k);
  const double scale = std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
  const double zero_tol = 1e-12 * scale;
  Index filled = 0;
  for (Index i = 0; i < k; ++i) {
    const Index src = d - 1 - i;
    const double lambda = solver.eigenvalues()(src);
    if (lambda <= zero_tol) break;
    Eigen::VectorXd axis = solver.eigenvectors().col(src);
    fix_sign(axis);
    model.components.row(i) = axis.transpose();
    model.explained_variance(i) = lambda;
    ++filled;
  }
  // Zero-variance directions: deterministic completion, zero variance.
  if (filled < k) {
    model.explained_variance.tail(k - filled).setZero();
    gram_schmidt_complete(model.components, filled);
  }
  return model;
}

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& matrix) {
  require(matrix.cols() == model.dim(), ErrorCode::DimMismatch,
          "pca_transform: matrix cols != model dimension");
  const Eigen::MatrixXd centered =
      matrix.cast<double>().rowwise() - model.mean.transpose();
  const Eigen::MatrixXd projected = centered * model.components.transpose();
  return projected.cast<float>();
}

FeatureMatrix pca_inverse_transform(const PcaModel& model,
                                    const FeatureMatrix& reduced) {
  require(reduced.cols() == model.k(), ErrorCode::DimMismatch,
          "pca_inverse_transform: matrix cols != model k");
  const Eigen::MatrixXd restored =
      (reduced.cast<double>() * model.components).rowwise() +
      model.mean.transpose();
  return restored.cast<float>();
}

void write_pca_model(const PcaModel& model, const std::filesystem::path& path) {
  nlohmann::json header{{"format", "atvg-pca"},
                        {"version", 1},
                        {"dim", model.dim()},
                        {"k", model.k()}};
  NamedBlobs blobs;
  blobs.emplace_back("mean",
                     FeatureMatrix(model.mean.transpose().cast<float>()));
  blobs.emplace_back("components",
                     FeatureMatrix(model.components.cast<float>()));
  blobs.emplace_back(
      "explained_variance",
      FeatureMatrix(model.explained_variance.transpose().cast<float>()));
  write_blob_file(path, header, blobs);
}

PcaModel read_pca_model(const std::filesystem::path& path) {
  auto [header, blobs] = read_blob_file(path);
  require(header.value("format", "") == "atvg-pca", ErrorCode::SchemaError,
          path.string() + ": not a pca model file");
  PcaModel model;
  for (const auto& [name, matrix] : blobs) {
    if (name == "mean") {
      model.mean = matrix.row(0).transpose().cast<double>();
    } else if (name == "components") {
      model.components = matrix.cast<double>();
    } else if (name == "explained_variance") {
      model.explained_variance = matrix.row(0).transpose().cast<double>();
    }
  }
  require(model.mean.size() > 0 && model.components.size() > 0,
          ErrorCode::SchemaError, path.string() + ": missing pca blobs");
  require(model.components.cols() == model.dim(), ErrorCode::SchemaError,
          path.string() + ": inconsistent pca blob shapes");
  return model;
}

}  // namespace atvg
