#pragma once

#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/modules/normalization.h>
#include <torch/nn/pimpl.h>

#include "glanet/config.hpp"
#include "glanet/style_code.hpp"

namespace gla {

struct StyleEncoderOptions {
  std::int64_t image_size = 64;
  std::int64_t channels = 3;
  std::int64_t patch_size = 8;
  std::int64_t embed_dim = 128;
  std::int64_t token_hidden = 256;
  std::int64_t channel_hidden = 256;
  std::int64_t depth = 1;
  std::int64_t code_dim = 32;
  double sigma_floor = kSigmaFloor;
  StyleReadout readout = StyleReadout::MeanPool;

  static StyleEncoderOptions from(const RunConfig& cfg);
};

// Splits an image into non-overlapping PxP patches, projects each, prepends a
// class token and adds positional embeddings.
class PatchEmbeddingImpl : public torch::nn::Module {
 public:
  PatchEmbeddingImpl(std::int64_t image_size, std::int64_t channels, std::int64_t patch_size,
                     std::int64_t embed_dim);

  // [B,C,H,W] -> [B,n,C*P*P]; patches in row-major grid order, each flattened as (c, row, col).
  torch::Tensor flatten_patches(const torch::Tensor& images) const;

  // [B,C,H,W] -> [B,n+1,D]; token 0 is the class token.
  torch::Tensor forward(const torch::Tensor& images);

  std::int64_t num_patches() const { return num_patches_; }
  std::int64_t patch_size() const { return patch_size_; }

  torch::nn::Linear projection{nullptr};
  torch::Tensor position;     // [n+1,D]
  torch::Tensor class_token;  // [D]

 private:
  std::int64_t patch_size_;
  std::int64_t num_patches_;
};
TORCH_MODULE(PatchEmbedding);

// One Mixer layer:
//   z'  = z  + W2 gelu(W1 LN(z)^T)^T     (token mixing)
//   z'' = z' + W4 gelu(W3 LN(z'))        (channel mixing)
class MixerLayerImpl : public torch::nn::Module {
 public:
  MixerLayerImpl(std::int64_t tokens, std::int64_t dim, std::int64_t token_hidden, std::int64_t channel_hidden);

  torch::Tensor forward(const torch::Tensor& z);

  torch::nn::LayerNorm token_norm{nullptr};
  torch::nn::Linear token_fc1{nullptr};  // W1
  torch::nn::Linear token_fc2{nullptr};  // W2
  torch::nn::LayerNorm channel_norm{nullptr};
  torch::nn::Linear channel_fc1{nullptr};  // W3
  torch::nn::Linear channel_fc2{nullptr};  // W4
};
TORCH_MODULE(MixerLayer);

// Patch embedding plus Mixer layers; shared by both domains.
class MixerTrunkImpl : public torch::nn::Module {
 public:
  explicit MixerTrunkImpl(const StyleEncoderOptions& opts);
  torch::Tensor forward(const torch::Tensor& images);  // [B,n+1,D]

  PatchEmbedding embed{nullptr};
  std::vector<MixerLayer> layers;
};
TORCH_MODULE(MixerTrunk);

class StyleEncoderImpl : public torch::nn::Module {
 public:
  explicit StyleEncoderImpl(const StyleEncoderOptions& opts);

  // Pooled trunk features [B,D] fed to the heads.
  torch::Tensor pooled(const torch::Tensor& images);

  // images [B,3,H,W] (or [3,H,W]) -> StyleCode with mu, sigma of shape [B,N].
  StyleCode forward(const torch::Tensor& images, Domain domain);

  // Turns 2N head outputs into (mu, softplus(raw) + floor).
  StyleCode split_head_output(const torch::Tensor& raw) const;

  torch::nn::Linear& head(Domain domain) { return domain == Domain::Source ? head_source : head_target; }

  const StyleEncoderOptions& options() const { return opts_; }

  MixerTrunk shared{nullptr};
  torch::nn::Linear head_source{nullptr};
  torch::nn::Linear head_target{nullptr};

 private:
  StyleEncoderOptions opts_;
};
TORCH_MODULE(StyleEncoder);

}  // namespace gla
