#include "glanet/style_encoder.hpp"

#include <torch/torch.h>

#include "glanet/errors.hpp"

namespace gla {

namespace F = torch::nn::functional;

StyleEncoderOptions StyleEncoderOptions::from(const RunConfig& cfg) {
  StyleEncoderOptions o;
  o.image_size = cfg.data.resolution;
  o.patch_size = cfg.style.patch_size;
  o.embed_dim = cfg.style.embed_dim;
  o.token_hidden = cfg.style.token_hidden;
  o.channel_hidden = cfg.style.channel_hidden;
  o.depth = cfg.style.depth;
  o.code_dim = cfg.style.code_dim;
  o.sigma_floor = cfg.style.sigma_floor;
  o.readout = cfg.style.readout;
  return o;
}

PatchEmbeddingImpl::PatchEmbeddingImpl(std::int64_t image_size, std::int64_t channels, std::int64_t patch_size,
                                       std::int64_t embed_dim)
    : patch_size_(patch_size) {
  if (patch_size < 1 || image_size % patch_size != 0)
    throw ConfigError("image size " + std::to_string(image_size) + " is not divisible by patch size " +
                      std::to_string(patch_size));
  const auto grid = image_size / patch_size;
  num_patches_ = grid * grid;
  projection = register_module("projection", torch::nn::Linear(channels * patch_size * patch_size, embed_dim));
  position = register_parameter("position", torch::randn({num_patches_ + 1, embed_dim}) * 0.02);
  class_token = register_parameter("class_token", torch::randn({embed_dim}) * 0.02);
}

torch::Tensor PatchEmbeddingImpl::flatten_patches(const torch::Tensor& images) const {
  if (images.dim() != 4) throw ConfigError("patch embedding expects [B,C,H,W]");
  const auto b = images.size(0), c = images.size(1), h = images.size(2), w = images.size(3);
  const auto p = patch_size_;
  if (h % p != 0 || w % p != 0)
    throw ConfigError("image " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by patch size " +
                      std::to_string(p));
  // [B,C,gh,P,gw,P] -> [B,gh,gw,C,P,P]
  return images.reshape({b, c, h / p, p, w / p, p})
      .permute({0, 2, 4, 1, 3, 5})
      .reshape({b, (h / p) * (w / p), c * p * p});
}

torch::Tensor PatchEmbeddingImpl::forward(const torch::Tensor& images) {
  auto tokens = projection->forward(flatten_patches(images));
  if (tokens.size(1) != num_patches_)
    throw ConfigError("patch count " + std::to_string(tokens.size(1)) + " does not match the configured " +
                      std::to_string(num_patches_));
  auto cls = class_token.view({1, 1, -1}).expand({tokens.size(0), 1, tokens.size(2)});
  return torch::cat({cls, tokens}, 1) + position.unsqueeze(0);
}

MixerLayerImpl::MixerLayerImpl(std::int64_t tokens, std::int64_t dim, std::int64_t token_hidden,
                               std::int64_t channel_hidden) {
  token_norm = register_module("token_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  token_fc1 = register_module("token_fc1", torch::nn::Linear(tokens, token_hidden));
  token_fc2 = register_module("token_fc2", torch::nn::Linear(token_hidden, tokens));
  channel_norm = register_module("channel_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  channel_fc1 = register_module("channel_fc1", torch::nn::Linear(dim, channel_hidden));
  channel_fc2 = register_module("channel_fc2", torch::nn::Linear(channel_hidden, dim));
}

torch::Tensor MixerLayerImpl::forward(const torch::Tensor& z) {
  if (z.dim() != 3 || z.size(1) != token_fc1->options.in_features() ||
      z.size(2) != channel_fc1->options.in_features())
    throw ConfigError("mixer layer: token sequence shape does not match layer parameters");
  // Token mixing acts along the token axis: transpose to [B,D,T].
  auto mixed = token_fc2->forward(F::gelu(token_fc1->forward(token_norm->forward(z).transpose(1, 2))));
  auto z1 = z + mixed.transpose(1, 2);
  return z1 + channel_fc2->forward(F::gelu(channel_fc1->forward(channel_norm->forward(z1))));
}

MixerTrunkImpl::MixerTrunkImpl(const StyleEncoderOptions& opts) {
  embed = register_module("embed", PatchEmbedding(opts.image_size, opts.channels, opts.patch_size, opts.embed_dim));
  const auto tokens = embed->num_patches() + 1;
  for (std::int64_t i = 0; i < opts.depth; ++i) {
    layers.push_back(register_module("mixer_" + std::to_string(i),
                                     MixerLayer(tokens, opts.embed_dim, opts.token_hidden, opts.channel_hidden)));
  }
}

torch::Tensor MixerTrunkImpl::forward(const torch::Tensor& images) {
  auto z = embed->forward(images);
  for (auto& layer : layers) z = layer->forward(z);
  return z;
}

StyleEncoderImpl::StyleEncoderImpl(const StyleEncoderOptions& opts) : opts_(opts) {
  if (opts.code_dim < 1) throw ConfigError("style code length must be >= 1");
  shared = register_module("shared", MixerTrunk(opts));
  head_source = register_module("head_source", torch::nn::Linear(opts.embed_dim, 2 * opts.code_dim));
  head_target = register_module("head_target", torch::nn::Linear(opts.embed_dim, 2 * opts.code_dim));
}

torch::Tensor StyleEncoderImpl::pooled(const torch::Tensor& images) {
  const auto batch = images.dim() == 3 ? images.unsqueeze(0) : images;
  auto z = shared->forward(batch);
  if (opts_.readout == StyleReadout::ClassToken) return z.select(1, 0);
  return z.mean(1);
}

StyleCode StyleEncoderImpl::split_head_output(const torch::Tensor& raw) const {
  const auto n = opts_.code_dim;
  return {raw.narrow(-1, 0, n), F::softplus(raw.narrow(-1, n, n)) + opts_.sigma_floor};
}

StyleCode StyleEncoderImpl::forward(const torch::Tensor& images, Domain domain) {
  return split_head_output(head(domain)->forward(pooled(images)));
}

}  // namespace gla
