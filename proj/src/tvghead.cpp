#include "atvg/tvghead.hpp"

#include "atvg/blobfile.hpp"
#include "atvg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atvg {

namespace {

constexpr double kClampEps = 1e-4;
constexpr double kAttnFloor = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::VectorXd shifted =
      (logits.array() - logits.maxCoeff()).exp();
  return shifted / shifted.sum();
}

// Everything grad() needs from one forward pass.
struct ForwardCache {
  Eigen::MatrixXd f;        // P x D (double)
  Eigen::MatrixXd t_attn;   // P x D_h, tanh(U)
  Eigen::VectorXd attention;
  Eigen::VectorXd pooled;   // D
  Eigen::VectorXd z;        // 2D
  Eigen::VectorXd h;        // H, tanh(h_pre)
  double c = 0.0, w = 0.0;  // sigmoided center/width
  double s_raw = 0.0, e_raw = 0.0;
  double t_start = 0.0, t_end = 0.0;
};

ForwardCache forward_cached(const FeatureMatrix& video,
                            const Eigen::VectorXd& query_vec,
                            const HeadParams& params) {
  const Index p = video.rows();
  const Index d = video.cols();
  require(p >= 1, ErrorCode::DimZero, "forward: no frames");
  require(query_vec.size() == d, ErrorCode::DimMismatch,
          "forward: query dimension != frame dimension");
  require(params.W_v.cols() == d && params.W_t.cols() == d,
          ErrorCode::DimMismatch, "forward: projection shape mismatch");
  require(params.W1.cols() == 2 * d, ErrorCode::DimMismatch,
          "forward: mlp input shape mismatch");
  require(params.v_att.size() == params.W_v.rows(), ErrorCode::DimMismatch,
          "forward: attention vector dimension mismatch");

  ForwardCache fc;
  fc.f = video.cast<double>();
  const Eigen::VectorXd text_proj = params.W_t * query_vec;
  Eigen::MatrixXd u = fc.f * params.W_v.transpose();
  u.rowwise() += text_proj.transpose();
  fc.t_attn = u.array().tanh();
  fc.attention = softmax(fc.t_attn * params.v_att);
  fc.pooled = fc.f.transpose() * fc.attention;

  fc.z.resize(2 * d);
  fc.z.head(d) = fc.pooled;
  fc.z.tail(d) = query_vec;
  fc.h = (params.W1 * fc.z + params.b1).array().tanh();
  const Eigen::Vector2d y = params.W2 * fc.h + params.b2;
  fc.c = sigmoid(y(0));
  fc.w = sigmoid(y(1));

  fc.s_raw = fc.c - fc.w / 2.0;
  fc.t_start = std::clamp(fc.s_raw, 0.0, 1.0 - kClampEps);
  fc.e_raw = fc.c + fc.w / 2.0;
  fc.t_end = std::clamp(fc.e_raw, fc.t_start + kClampEps, 1.0);
  return fc;
}

double huber_grad(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0 ? delta : -delta;
}

Eigen::VectorXd gt_mask(const Moment& gt, Index frame_count) {
  const Index lo = std::max<Index>(0, gt.start);
  const Index hi = std::min<Index>(frame_count, gt.end);
  require(hi > lo, ErrorCode::DegenerateMask,
          "guide_loss: gt moment empty after clipping");
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(frame_count);
  mask.segment(lo, hi - lo).setConstant(1.0 / double(hi - lo));
  return mask;
}

}  // namespace

HeadParams HeadParams::zeros(const HeadConfig& cfg) {
  HeadParams p;
  p.W_v = Eigen::MatrixXd::Zero(cfg.attn_dim, cfg.input_dim);
  p.W_t = Eigen::MatrixXd::Zero(cfg.attn_dim, cfg.input_dim);
  p.v_att = Eigen::VectorXd::Zero(cfg.attn_dim);
  p.W1 = Eigen::MatrixXd::Zero(cfg.hidden_dim, 2 * cfg.input_dim);
  p.b1 = Eigen::VectorXd::Zero(cfg.hidden_dim);
  p.W2 = Eigen::MatrixXd::Zero(2, cfg.hidden_dim);
  p.b2 = Eigen::VectorXd::Zero(2);
  return p;
}

HeadParams HeadParams::random_init(const HeadConfig& cfg, std::uint64_t seed) {
  HeadParams p = zeros(cfg);
  std::uint64_t rng = seed;
  const auto fill = [&rng](Eigen::Ref<Eigen::MatrixXd> m, double scale) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        m(i, j) = scale * next_gaussian(rng);
      }
    }
  };
  fill(p.W_v, 1.0 / std::sqrt(double(cfg.input_dim)));
  fill(p.W_t, 1.0 / std::sqrt(double(cfg.input_dim)));
  fill(p.v_att, 1.0 / std::sqrt(double(cfg.attn_dim)));
  fill(p.W1, 1.0 / std::sqrt(double(2 * cfg.input_dim)));
  fill(p.W2, 1.0 / std::sqrt(double(cfg.hidden_dim)));
  // b1, b2 stay zero.
  return p;
}

ForwardOutput forward(const FeatureMatrix& video,
                      const Eigen::VectorXd& query_vec,
                      const HeadParams& params) {
  const ForwardCache fc = forward_cached(video, query_vec, params);
  return ForwardOutput{fc.attention, fc.t_start, fc.t_end};
}

double huber(double pred, double target, double delta) {
  require(delta > 0.0, ErrorCode::ConfigError, "huber: delta must be > 0");
  const double r = pred - target;
  const double a = std::abs(r);
  if (a <= delta) return 0.5 * r * r;
  return delta * (a - 0.5 * delta);
}

double guide_loss(const Eigen::VectorXd& attention, const Moment& gt,
                  Index frame_count) {
  require(attention.size() == frame_count, ErrorCode::DimMismatch,
          "guide_loss: attention length != frame count");
  const Eigen::VectorXd mask = gt_mask(gt, frame_count);
  double kl = 0.0;
  for (Index i = 0; i < frame_count; ++i) {
    if (mask(i) > 0.0) {
      const double a = std::max(attention(i), kAttnFloor);
      kl += mask(i) * std::log(mask(i) / a);
    }
  }
  return std::max(kl, 0.0);
}

LossBreakdown total_loss(const ForwardOutput& fwd, double gt_start_norm,
                         double gt_end_norm, const Moment& gt_frames,
                         double lambda, double delta) {
  LossBreakdown loss;
  loss.lambda = lambda;
  loss.reg = 0.5 * (huber(fwd.t_start, gt_start_norm, delta) +
                    huber(fwd.t_end, gt_end_norm, delta));
  loss.guide =
      guide_loss(fwd.attention, gt_frames, fwd.attention.size());
  loss.total = loss.reg + lambda * loss.guide;
  return loss;
}

LossBreakdown batch_loss(const HeadParams& params,
                         const std::vector<TrainExample>& batch,
                         const HeadConfig& cfg) {
  require(!batch.empty(), ErrorCode::ConfigError, "batch_loss: empty batch");
  LossBreakdown acc;
  acc.lambda = cfg.lambda;
  for (const auto& ex : batch) {
    const Index p = ex.frames.rows();
    const ForwardOutput out = forward(ex.frames, ex.query_vec, params);
    const LossBreakdown one =
        total_loss(out, double(ex.gt.start) / double(p),
                   double(ex.gt.end) / double(p), ex.gt, cfg.lambda,
                   cfg.huber_delta);
    acc.reg += one.reg;
    acc.guide += one.guide;
  }
  acc.reg /= double(batch.size());
  acc.guide /= double(batch.size());
  acc.total = acc.reg + cfg.lambda * acc.guide;
  return acc;
}

Gradients grad(const HeadParams& params,
               const std::vector<TrainExample>& batch, const HeadConfig& cfg) {
  require(!batch.empty(), ErrorCode::ConfigError, "grad: empty batch");
  Gradients g = HeadParams::zeros(cfg);

  for (const auto& ex : batch) {
    const ForwardCache fc = forward_cached(ex.frames, ex.query_vec, params);
    const Index p = ex.frames.rows();
    const Index d = ex.frames.cols();
    const double gs = double(ex.gt.start) / double(p);
    const double ge = double(ex.gt.end) / double(p);

    // Regression branch. Clamp gradients vanish outside the active region.
    const double dl_ds = 0.5 * huber_grad(fc.t_start - gs, cfg.huber_delta);
    const double dl_de = 0.5 * huber_grad(fc.t_end - ge, cfg.huber_delta);

    const bool s_active = fc.s_raw > 0.0 && fc.s_raw < 1.0 - kClampEps;
    const double lower = fc.t_start + kClampEps;
    double dc = 0.0, dw = 0.0;
    double ds_total = dl_ds;
    if (fc.e_raw < lower) {
      ds_total += dl_de;  // t_end rides on t_start + eps
    } else if (fc.e_raw < 1.0) {
      dc += dl_de;
      dw += 0.5 * dl_de;
    }
    if (s_active) {
      dc += ds_total;
      dw -= 0.5 * ds_total;
    }

    Eigen::Vector2d dy;
    dy(0) = dc * fc.c * (1.0 - fc.c);
    dy(1) = dw * fc.w * (1.0 - fc.w);

    // MLP backward.
    g.W2 += dy * fc.h.transpose();
    g.b2 += dy;
    const Eigen::VectorXd dh = params.W2.transpose() * dy;
    const Eigen::VectorXd dh_pre =
        dh.array() * (1.0 - fc.h.array().square());
    g.W1 += dh_pre * fc.z.transpose();
    g.b1 += dh_pre;
    const Eigen::VectorXd dz = params.W1.transpose() * dh_pre;
    const Eigen::VectorXd dpooled = dz.head(d);

    // Attention backward: pooled path plus the guide loss.
    Eigen::VectorXd da = fc.f * dpooled;
    const Eigen::VectorXd mask = gt_mask(ex.gt, p);
    for (Index i = 0; i < p; ++i) {
      if (mask(i) > 0.0 && fc.attention(i) >= kAttnFloor) {
        da(i) -= cfg.lambda * mask(i) / fc.attention(i);
      }
    }
    const double inner = fc.attention.dot(da);
    const Eigen::VectorXd de =
        fc.attention.array() * (da.array() - inner);

    // Additive attention backward.
    g.v_att += fc.t_attn.transpose() * de;
    const Eigen::MatrixXd dt = de * params.v_att.transpose();  // P x D_h
    const Eigen::MatrixXd du =
        dt.array() * (1.0 - fc.t_attn.array().square());
    g.W_v += du.transpose() * fc.f;
    g.W_t += du.colwise().sum().transpose() * ex.query_vec.transpose();
  }

  const double inv = 1.0 / double(batch.size());
  g.for_each([inv](auto& tensor) { tensor *= inv; });
  return g;
}

AdamState AdamState::init(const HeadConfig& cfg) {
  AdamState st;
  st.m = HeadParams::zeros(cfg);
  st.v = HeadParams::zeros(cfg);
  st.t = 0;
  return st;
}

namespace {

template <typename T>
void adam_update_tensor(T& p, const T& g, T& m, T& v, double lr, double beta1,
                        double beta2, double eps, double bc1, double bc2) {
  m.array() = beta1 * m.array() + (1.0 - beta1) * g.array();
  v.array() = beta2 * v.array() + (1.0 - beta2) * g.array().square();
  p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

void adam_step(HeadParams& params, const Gradients& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  adam_update_tensor(params.W_v, grads.W_v, state.m.W_v, state.v.W_v, lr,
                     beta1, beta2, eps, bc1, bc2);
  adam_update_tensor(params.W_t, grads.W_t, state.m.W_t, state.v.W_t, lr,
                     beta1, beta2, eps, bc1, bc2);
  adam_update_tensor(params.v_att, grads.v_att, state.m.v_att, state.v.v_att,
                     lr, beta1, beta2, eps, bc1, bc2);
  adam_update_tensor(params.W1, grads.W1, state.m.W1, state.v.W1, lr, beta1,
                     beta2, eps, bc1, bc2);
  adam_update_tensor(params.b1, grads.b1, state.m.b1, state.v.b1, lr, beta1,
                     beta2, eps, bc1, bc2);
  adam_update_tensor(params.W2, grads.W2, state.m.W2, state.v.W2, lr, beta1,
                     beta2, eps, bc1, bc2);
  adam_update_tensor(params.b2, grads.b2, state.m.b2, state.v.b2, lr, beta1,
                     beta2, eps, bc1, bc2);
}

TrainResult train(const std::vector<TrainExample>& dataset,
                  const TrainConfig& config) {
  require(!dataset.empty(), ErrorCode::ConfigError, "train: empty dataset");
  for (const auto& ex : dataset) {
    require(ex.gt.valid(ex.frames.rows()), ErrorCode::OutOfRange,
            "train: gt moment outside frame range");
  }

  TrainResult result;
  result.params =
      HeadParams::random_init(config.head, config.seed ^ fnv1a64("head-init"));
  AdamState state = AdamState::init(config.head);

  const std::size_t n = dataset.size();
  const std::size_t batch_size =
      config.batch_size <= 0
          ? n
          : std::min<std::size_t>(n, std::size_t(config.batch_size));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t shuffle_rng = config.seed ^ fnv1a64("train-shuffle");

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch_size < n) {
      // Fisher-Yates, portable RNG.
      for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = uniform_index(shuffle_rng, i + 1);
        std::swap(order[i], order[static_cast<std::size_t>(j)]);
      }
    }
    for (std::size_t at = 0; at < n; at += batch_size) {
      const std::size_t stop = std::min(n, at + batch_size);
      std::vector<TrainExample> batch;
      batch.reserve(stop - at);
      for (std::size_t i = at; i < stop; ++i) batch.push_back(dataset[order[i]]);
      const Gradients g = grad(result.params, batch, config.head);
      adam_step(result.params, g, state, config.lr, config.beta1, config.beta2,
                config.adam_eps);
    }
    result.trace.push_back(batch_loss(result.params, dataset, config.head));
  }
  return result;
}

namespace {

FeatureMatrix to_blob(const Eigen::MatrixXd& m) { return m.cast<float>(); }
FeatureMatrix to_blob(const Eigen::VectorXd& v) {
  return FeatureMatrix(v.transpose().cast<float>());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const HeadParams& params, const HeadConfig& cfg,
                     std::uint64_t seed, int epoch) {
  nlohmann::json header{
      {"format", "atvg-checkpoint"},
      {"version", 1},
      {"dims",
       {{"input_dim", cfg.input_dim},
        {"attn_dim", cfg.attn_dim},
        {"hidden_dim", cfg.hidden_dim}}},
      {"config", {{"lambda", cfg.lambda}, {"huber_delta", cfg.huber_delta}}},
      {"seed", seed},
      {"epoch", epoch}};
  NamedBlobs blobs;
  blobs.emplace_back("W_v", to_blob(params.W_v));
  blobs.emplace_back("W_t", to_blob(params.W_t));
  blobs.emplace_back("v_att", to_blob(params.v_att));
  blobs.emplace_back("W1", to_blob(params.W1));
  blobs.emplace_back("b1", to_blob(params.b1));
  blobs.emplace_back("W2", to_blob(params.W2));
  blobs.emplace_back("b2", to_blob(params.b2));
  write_blob_file(path, header, blobs);
}

std::pair<HeadParams, HeadConfig> load_checkpoint(
    const std::filesystem::path& path) {
  auto [header, blobs] = read_blob_file(path);
  require(header.value("format", "") == "atvg-checkpoint",
          ErrorCode::SchemaError, path.string() + ": not a checkpoint file");
  HeadConfig cfg;
  cfg.input_dim = header["dims"]["input_dim"].get<Index>();
  cfg.attn_dim = header["dims"]["attn_dim"].get<Index>();
  cfg.hidden_dim = header["dims"]["hidden_dim"].get<Index>();
  cfg.lambda = header["config"]["lambda"].get<double>();
  cfg.huber_delta = header["config"]["huber_delta"].get<double>();

  HeadParams p = HeadParams::zeros(cfg);
  for (const auto& [name, blob] : blobs) {
    const Eigen::MatrixXd m = blob.cast<double>();
    if (name == "W_v") p.W_v = m;
    else if (name == "W_t") p.W_t = m;
    else if (name == "v_att") p.v_att = m.row(0).transpose();
    else if (name == "W1") p.W1 = m;
    else if (name == "b1") p.b1 = m.row(0).transpose();
    else if (name == "W2") p.W2 = m;
    else if (name == "b2") p.b2 = m.row(0).transpose();
  }
  require(p.W_v.rows() == cfg.attn_dim && p.W_v.cols() == cfg.input_dim,
          ErrorCode::SchemaError, path.string() + ": blob shapes inconsistent");
  return {std::move(p), cfg};
}

}  // namespace atvg
