#pragma once

#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

#include "glanet/config.hpp"
#include "glanet/normalization.hpp"

namespace gla {

enum class DecoderNorm {
  AdaINNew,           // style-driven affine through StyleProjection
  PlainInstanceNorm,  // gamma = 1, beta = 0; the code is ignored
};

struct GeneratorOptions {
  std::int64_t in_channels = 3;
  std::int64_t depth = 3;
  std::int64_t base_channels = 64;
  std::int64_t channel_cap = 256;
  std::int64_t code_dim = 32;
  DecoderNorm decoder_norm = DecoderNorm::AdaINNew;

  static GeneratorOptions from(const RunConfig& cfg);

  // Channels at encoder level k (k = 0 is the full-resolution stem).
  std::int64_t channels(std::int64_t level) const;
};

// Bottleneck plus one skip tensor per encoder level above it.
struct ContentCode {
  torch::Tensor bottleneck;
  std::vector<torch::Tensor> skips;  // skips[k] at resolution / 2^k
};

class ContentEncoderImpl : public torch::nn::Module {
 public:
  explicit ContentEncoderImpl(const GeneratorOptions& opts);
  ContentCode forward(const torch::Tensor& images);

  torch::nn::Conv2d stem{nullptr};
  InstanceNorm stem_norm{nullptr};
  std::vector<torch::nn::Conv2d> down;
  std::vector<InstanceNorm> down_norm;

 private:
  GeneratorOptions opts_;
};
TORCH_MODULE(ContentEncoder);

// Upsample, concatenate the skip, convolve, AdaIN-new, ReLU; per level.
class ContentDecoderImpl : public torch::nn::Module {
 public:
  explicit ContentDecoderImpl(const GeneratorOptions& opts);
  torch::Tensor forward(const ContentCode& content, const StyleCode& code);

  std::vector<torch::nn::Conv2d> blocks;
  std::vector<StyleProjection> adain;
  torch::nn::Conv2d out{nullptr};

  DecoderNorm norm_mode;

 private:
  GeneratorOptions opts_;
};
TORCH_MODULE(ContentDecoder);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorOptions& opts);

  ContentCode encode(const torch::Tensor& images);
  torch::Tensor decode(const ContentCode& content, const StyleCode& code);
  torch::Tensor translate(const torch::Tensor& images, const StyleCode& code);

  // Ablation without AdaIN-new: every projection frozen to plain instance norm.
  void freeze_plain_projections();

  const GeneratorOptions& options() const { return opts_; }

  ContentEncoder encoder{nullptr};
  ContentDecoder decoder{nullptr};

 private:
  GeneratorOptions opts_;
};
TORCH_MODULE(Generator);

}  // namespace gla
