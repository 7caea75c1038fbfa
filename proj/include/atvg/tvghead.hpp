#pragma once

#include "atvg/types.hpp"

#include <filesystem>
#include <vector>

namespace atvg {

struct HeadConfig {
  Index input_dim = 8;   // D: frame/query feature dimension
  Index attn_dim = 8;    // D_h: attention projection dimension
  Index hidden_dim = 8;  // H: regression MLP hidden width
  double lambda = 1.0;   // guide-loss weight
  double huber_delta = 1.0;
};

// Additive-attention grounding head:
//   e_i = v_att . tanh(W_v f_i + W_t q),  a = softmax(e)
//   pooled = sum_i a_i f_i,  z = [pooled; q]
//   (c, w) = sigmoid(W2 tanh(W1 z + b1) + b2)
//   t_s = clamp(c - w/2, 0, 1-eps),  t_e = clamp(c + w/2, t_s+eps, 1)
struct HeadParams {
  Eigen::MatrixXd W_v;    // D_h x D
  Eigen::MatrixXd W_t;    // D_h x D
  Eigen::VectorXd v_att;  // D_h
  Eigen::MatrixXd W1;     // H x 2D
  Eigen::VectorXd b1;     // H
  Eigen::MatrixXd W2;     // 2 x H
  Eigen::VectorXd b2;     // 2

  static HeadParams zeros(const HeadConfig& cfg);
  static HeadParams random_init(const HeadConfig& cfg, std::uint64_t seed);

  // Visits every tensor in a fixed order; keeps Adam and the gradient check
  // free of per-field boilerplate.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(W_v); fn(W_t); fn(v_att); fn(W1); fn(b1); fn(W2); fn(b2);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(W_v); fn(W_t); fn(v_att); fn(W1); fn(b1); fn(W2); fn(b2);
  }
};

using Gradients = HeadParams;

struct ForwardOutput {
  Eigen::VectorXd attention;  // P nonnegative weights summing to 1
  double t_start = 0.0;       // normalized, in [0, 1), strictly < t_end
  double t_end = 0.0;
};

ForwardOutput forward(const FeatureMatrix& video,
                      const Eigen::VectorXd& query_vec,
                      const HeadParams& params);

double huber(double pred, double target, double delta);

// KL(normalized gt mask || attention), attention floored at 1e-12.
double guide_loss(const Eigen::VectorXd& attention, const Moment& gt,
                  Index frame_count);

struct LossBreakdown {
  double reg = 0.0;
  double guide = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

LossBreakdown total_loss(const ForwardOutput& fwd, double gt_start_norm,
                         double gt_end_norm, const Moment& gt_frames,
                         double lambda, double delta);

struct TrainExample {
  FeatureMatrix frames;      // P x D
  Eigen::VectorXd query_vec;  // D
  Moment gt;                  // frame indices within [0, P)
};

// Mean total loss over a batch; the quantity grad() differentiates.
LossBreakdown batch_loss(const HeadParams& params,
                         const std::vector<TrainExample>& batch,
                         const HeadConfig& cfg);

Gradients grad(const HeadParams& params,
               const std::vector<TrainExample>& batch, const HeadConfig& cfg);

struct AdamState {
  HeadParams m;
  HeadParams v;
  long t = 0;

  static AdamState init(const HeadConfig& cfg);
};

void adam_step(HeadParams& params, const Gradients& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

struct TrainConfig {
  HeadConfig head;
  int epochs = 200;
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  Index batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
};

struct TrainResult {
  HeadParams params;
  std::vector<LossBreakdown> trace;  // one entry per epoch
};

TrainResult train(const std::vector<TrainExample>& dataset,
                  const TrainConfig& config);

// Checkpoint: JSON header (dims, config, seed, epoch, blob manifest) +
// concatenated ATVG blobs, one per parameter tensor.
void save_checkpoint(const std::filesystem::path& path,
                     const HeadParams& params, const HeadConfig& cfg,
                     std::uint64_t seed, int epoch);
std::pair<HeadParams, HeadConfig> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace atvg
