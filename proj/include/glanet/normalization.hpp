#pragma once

#include <utility>

#include <torch/nn/module.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

#include "glanet/style_code.hpp"

namespace gla {

inline constexpr double kNormEps = 1e-5;

// Per-sample, per-channel statistics over the spatial dimensions. [B,C] each.
struct ChannelStats {
  torch::Tensor mean;
  torch::Tensor std;
};

// x is [B,C,H,W] or [C,H,W]. Population std, clamped below at eps.
ChannelStats channel_stats(const torch::Tensor& x, double eps = kNormEps);

// gamma * (x - mu(x)) / sigma(x) + kappa. gamma/kappa are [C] or [B,C].
torch::Tensor instance_norm(const torch::Tensor& x, const torch::Tensor& gamma, const torch::Tensor& kappa);

// sigma(y) * (x - mu(x)) / sigma(x) + mu(y), with y's statistics given.
torch::Tensor adain_classic(const torch::Tensor& x, const ChannelStats& target);

// Instance norm with learnable per-channel scale and shift.
class InstanceNormImpl : public torch::nn::Module {
 public:
  explicit InstanceNormImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;
};
TORCH_MODULE(InstanceNorm);

// Learned affine map from a style code (mu || sigma, width 2N) to the
// per-channel (gamma, beta) of one AdaIN-new site (width 2C).
class StyleProjectionImpl : public torch::nn::Module {
 public:
  StyleProjectionImpl(std::int64_t code_dim, std::int64_t channels);

  // Returns (gamma, beta), each [B,C].
  std::pair<torch::Tensor, torch::Tensor> forward(const StyleCode& code);

  // gamma = sigma_y, beta = mu_y. Requires code_dim == channels.
  void set_identity();
  // Zero weights, bias (1, 0): reduces AdaIN-new to plain instance norm. Parameters frozen.
  void freeze_plain();

  std::int64_t code_dim() const { return code_dim_; }
  std::int64_t channels() const { return channels_; }

  torch::nn::Linear proj{nullptr};

 private:
  std::int64_t code_dim_;
  std::int64_t channels_;
};
TORCH_MODULE(StyleProjection);

// gamma * (x - mu(x)) / sigma(x) + beta with (gamma, beta) = proj(code).
torch::Tensor adain_new(const torch::Tensor& x, const StyleCode& code, StyleProjection& proj);

}  // namespace gla
