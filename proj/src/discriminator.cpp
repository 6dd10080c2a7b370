#include "glanet/discriminator.hpp"

#include <algorithm>

#include <torch/torch.h>

#include "glanet/errors.hpp"

namespace gla {

namespace F = torch::nn::functional;

DiscriminatorOptions DiscriminatorOptions::from(const RunConfig& cfg) {
  DiscriminatorOptions o;
  o.base_channels = cfg.gan.base_channels;
  o.blocks = cfg.gan.blocks;
  return o;
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorOptions& opts) {
  if (opts.blocks < 1) throw ConfigError("discriminator needs at least one block");
  auto in = opts.in_channels;
  for (std::int64_t i = 0; i < opts.blocks; ++i) {
    const auto out = std::min(opts.base_channels << i, opts.channel_cap);
    convs.push_back(register_module("conv_" + std::to_string(i),
                                    torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1))));
    in = out;
  }
  head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 3).padding(1)));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& images) {
  auto h = images.dim() == 3 ? images.unsqueeze(0) : images;
  for (auto& conv : convs) h = F::leaky_relu(conv->forward(h), F::LeakyReLUFuncOptions().negative_slope(0.2));
  return head->forward(h);
}

torch::Tensor d_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  // -log sigmoid(l) = softplus(-l); -log(1 - sigmoid(l)) = softplus(l)
  return F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
}

torch::Tensor g_loss(const torch::Tensor& fake_logits, GeneratorLossMode mode) {
  switch (mode) {
    case GeneratorLossMode::Saturating: return -F::softplus(fake_logits).mean();
    case GeneratorLossMode::NonSaturating: return F::softplus(-fake_logits).mean();
  }
  throw ConfigError("unknown generator loss mode");
}

GeneratorLossMode parse_generator_loss_mode(std::string_view text) {
  if (text == "saturating") return GeneratorLossMode::Saturating;
  if (text == "non_saturating") return GeneratorLossMode::NonSaturating;
  throw ConfigError("unknown generator loss mode '" + std::string(text) + "'");
}

}  // namespace gla
