#pragma once

#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

#include "glanet/config.hpp"

namespace gla {

struct DiscriminatorOptions {
  std::int64_t in_channels = 3;
  std::int64_t base_channels = 64;
  std::int64_t blocks = 3;
  std::int64_t channel_cap = 512;

  static DiscriminatorOptions from(const RunConfig& cfg);
};

// PatchGAN: `blocks` stride-2 4x4 convolutions with LeakyReLU(0.2), then a 3x3
// convolution to one raw logit per patch.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscriminatorOptions& opts);

  // [B,3,H,W] -> [B,1,H/2^blocks,W/2^blocks] logits.
  torch::Tensor forward(const torch::Tensor& images);

  std::vector<torch::nn::Conv2d> convs;
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(Discriminator);

// mean(-log D(real)) + mean(-log(1 - D(fake))), evaluated from logits.
torch::Tensor d_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);

// Saturating: mean(log(1 - D(fake))). Non-saturating: mean(-log D(fake)).
torch::Tensor g_loss(const torch::Tensor& fake_logits, GeneratorLossMode mode);

GeneratorLossMode parse_generator_loss_mode(std::string_view text);

}  // namespace gla
