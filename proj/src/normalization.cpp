#include "glanet/normalization.hpp"

#include <torch/torch.h>

#include "glanet/errors.hpp"

namespace gla {

namespace {

// Lifts [C,H,W] to [1,C,H,W]; reports whether it did.
std::pair<torch::Tensor, bool> as_batch(const torch::Tensor& x) {
  if (x.dim() == 4) return {x, false};
  if (x.dim() == 3) return {x.unsqueeze(0), true};
  throw ConfigError("feature tensor must be [C,H,W] or [B,C,H,W]");
}

// [C] or [B,C] -> [*,C,1,1]
torch::Tensor per_channel(const torch::Tensor& v, std::int64_t channels, const char* what) {
  if (v.size(-1) != channels)
    throw ConfigError(std::string(what) + " has " + std::to_string(v.size(-1)) + " channels, expected " +
                      std::to_string(channels));
  if (v.dim() == 1) return v.view({1, channels, 1, 1});
  return v.view({v.size(0), channels, 1, 1});
}

torch::Tensor standardize(const torch::Tensor& x4, double eps) {
  if (x4.size(2) * x4.size(3) < 2) throw ConfigError("instance normalization needs at least 2 spatial elements");
  const auto mean = x4.mean({2, 3}, /*keepdim=*/true);
  const auto var = (x4 - mean).pow(2).mean({2, 3}, true);
  // Clamp the variance (not the std) so constant channels get a zero gradient, not inf * 0.
  const auto std = var.clamp_min(eps * eps).sqrt();
  return (x4 - mean) / std;
}

}  // namespace

void StyleCode::validate(double floor) const {
  if (!mu.defined() || !sigma.defined()) throw ConfigError("style code is empty");
  if (mu.sizes() != sigma.sizes()) throw ConfigError("style code mu/sigma shapes differ");
  if (sigma.min().item<double>() < floor * (1 - 1e-6))
    throw ConfigError("style code sigma below floor " + std::to_string(floor));
}

torch::Tensor StyleCode::concat() const { return torch::cat({mu, sigma}, -1); }

ChannelStats channel_stats(const torch::Tensor& x, double eps) {
  auto [x4, lifted] = as_batch(x);
  const auto mean = x4.mean({2, 3});
  const auto var = (x4 - mean.unsqueeze(-1).unsqueeze(-1)).pow(2).mean({2, 3});
  return {mean, var.clamp_min(eps * eps).sqrt()};
}

torch::Tensor instance_norm(const torch::Tensor& x, const torch::Tensor& gamma, const torch::Tensor& kappa) {
  auto [x4, lifted] = as_batch(x);
  const auto c = x4.size(1);
  auto out = per_channel(gamma, c, "gamma") * standardize(x4, kNormEps) + per_channel(kappa, c, "kappa");
  return lifted ? out.squeeze(0) : out;
}

torch::Tensor adain_classic(const torch::Tensor& x, const ChannelStats& target) {
  auto [x4, lifted] = as_batch(x);
  const auto c = x4.size(1);
  if (target.mean.size(-1) != c || target.std.size(-1) != c)
    throw ConfigError("adain: target statistics have " + std::to_string(target.mean.size(-1)) +
                      " channels, input has " + std::to_string(c));
  auto out = per_channel(target.std, c, "target std") * standardize(x4, kNormEps) +
             per_channel(target.mean, c, "target mean");
  return lifted ? out.squeeze(0) : out;
}

InstanceNormImpl::InstanceNormImpl(std::int64_t channels) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor InstanceNormImpl::forward(const torch::Tensor& x) { return instance_norm(x, weight, bias); }

StyleProjectionImpl::StyleProjectionImpl(std::int64_t code_dim, std::int64_t channels)
    : code_dim_(code_dim), channels_(channels) {
  proj = register_module("proj", torch::nn::Linear(2 * code_dim, 2 * channels));
  // Start near plain instance norm: small weights, gamma bias 1.
  torch::NoGradGuard guard;
  proj->weight.mul_(0.1);
  proj->bias.zero_();
  proj->bias.narrow(0, 0, channels).fill_(1.0);
}

std::pair<torch::Tensor, torch::Tensor> StyleProjectionImpl::forward(const StyleCode& code) {
  if (code.dim() != code_dim_)
    throw ConfigError("style projection expects code length " + std::to_string(code_dim_) + ", got " +
                      std::to_string(code.dim()));
  const auto out = proj->forward(code.concat());
  return {out.narrow(-1, 0, channels_), out.narrow(-1, channels_, channels_)};
}

void StyleProjectionImpl::set_identity() {
  if (code_dim_ != channels_) throw ConfigError("identity style projection needs N == C");
  torch::NoGradGuard guard;
  proj->weight.zero_();
  proj->bias.zero_();
  const auto eye = torch::eye(channels_, proj->weight.options());
  proj->weight.narrow(0, 0, channels_).narrow(1, code_dim_, code_dim_).copy_(eye);         // gamma <- sigma
  proj->weight.narrow(0, channels_, channels_).narrow(1, 0, code_dim_).copy_(eye);         // beta  <- mu
}

void StyleProjectionImpl::freeze_plain() {
  {
    torch::NoGradGuard guard;
    proj->weight.zero_();
    proj->bias.zero_();
    proj->bias.narrow(0, 0, channels_).fill_(1.0);
  }
  for (auto& p : parameters()) p.set_requires_grad(false);
}

torch::Tensor adain_new(const torch::Tensor& x, const StyleCode& code, StyleProjection& proj) {
  auto [x4, lifted] = as_batch(x);
  const auto c = x4.size(1);
  if (proj->channels() != c)
    throw ConfigError("adain_new: projection yields " + std::to_string(2 * proj->channels()) +
                      " values, layer needs " + std::to_string(2 * c));
  auto [gamma, beta] = proj->forward(code);
  auto out = per_channel(gamma, c, "gamma") * standardize(x4, kNormEps) + per_channel(beta, c, "beta");
  return lifted ? out.squeeze(0) : out;
}

}  // namespace gla
