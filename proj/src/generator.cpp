#include "glanet/generator.hpp"

#include <algorithm>

#include <torch/torch.h>

#include "glanet/errors.hpp"

namespace gla {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv3x3(std::int64_t in, std::int64_t out, std::int64_t stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

}  // namespace

GeneratorOptions GeneratorOptions::from(const RunConfig& cfg) {
  GeneratorOptions o;
  o.depth = cfg.generator.depth;
  o.base_channels = cfg.generator.base_channels;
  o.channel_cap = cfg.generator.channel_cap;
  o.code_dim = cfg.style.code_dim;
  return o;
}

std::int64_t GeneratorOptions::channels(std::int64_t level) const {
  return std::min(base_channels << level, channel_cap);
}

ContentEncoderImpl::ContentEncoderImpl(const GeneratorOptions& opts) : opts_(opts) {
  if (opts.depth < 1) throw ConfigError("generator depth must be >= 1");
  stem = register_module("stem", conv3x3(opts.in_channels, opts.channels(0)));
  stem_norm = register_module("stem_norm", InstanceNorm(opts.channels(0)));
  for (std::int64_t k = 1; k <= opts.depth; ++k) {
    const auto name = std::to_string(k - 1);
    down.push_back(register_module("down_" + name, conv3x3(opts.channels(k - 1), opts.channels(k), 2)));
    down_norm.push_back(register_module("down_norm_" + name, InstanceNorm(opts.channels(k))));
  }
}

ContentCode ContentEncoderImpl::forward(const torch::Tensor& images) {
  const auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
  const auto factor = std::int64_t{1} << opts_.depth;
  if (x.size(2) % factor != 0 || x.size(3) % factor != 0)
    throw ConfigError("resolution " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                      " is not divisible by 2^depth = " + std::to_string(factor));
  ContentCode code;
  auto h = torch::relu(stem_norm->forward(stem->forward(x)));
  for (std::size_t k = 0; k < down.size(); ++k) {
    code.skips.push_back(h);
    h = torch::relu(down_norm[k]->forward(down[k]->forward(h)));
  }
  code.bottleneck = h;
  return code;
}

ContentDecoderImpl::ContentDecoderImpl(const GeneratorOptions& opts) : norm_mode(opts.decoder_norm), opts_(opts) {
  // blocks[0] runs at the coarsest level.
  for (std::int64_t i = 0; i < opts.depth; ++i) {
    const auto level = opts.depth - i;
    const auto in = opts.channels(level) + opts.channels(level - 1);
    const auto out_ch = opts.channels(level - 1);
    blocks.push_back(register_module("block_" + std::to_string(i), conv3x3(in, out_ch)));
    adain.push_back(register_module("adain_" + std::to_string(i), StyleProjection(opts.code_dim, out_ch)));
  }
  out = register_module("out", conv3x3(opts.channels(0), opts.in_channels));
}

torch::Tensor ContentDecoderImpl::forward(const ContentCode& content, const StyleCode& code) {
  if (content.skips.size() != blocks.size())
    throw ConfigError("content code has " + std::to_string(content.skips.size()) + " skips, decoder expects " +
                      std::to_string(blocks.size()));
  if (code.dim() != opts_.code_dim)
    throw ConfigError("style code length " + std::to_string(code.dim()) + " does not match generator N = " +
                      std::to_string(opts_.code_dim));
  auto h = content.bottleneck;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& skip = content.skips[blocks.size() - 1 - i];
    h = F::interpolate(h, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{skip.size(2), skip.size(3)})
                              .mode(torch::kNearest));
    h = blocks[i]->forward(torch::cat({h, skip}, 1));
    if (norm_mode == DecoderNorm::AdaINNew) {
      h = adain_new(h, code, adain[i]);
    } else {
      const auto c = h.size(1);
      h = instance_norm(h, torch::ones({c}, h.options()), torch::zeros({c}, h.options()));
    }
    h = torch::relu(h);
  }
  return torch::tanh(out->forward(h));
}

GeneratorImpl::GeneratorImpl(const GeneratorOptions& opts) : opts_(opts) {
  encoder = register_module("encoder", ContentEncoder(opts));
  decoder = register_module("decoder", ContentDecoder(opts));
}

ContentCode GeneratorImpl::encode(const torch::Tensor& images) { return encoder->forward(images); }

torch::Tensor GeneratorImpl::decode(const ContentCode& content, const StyleCode& code) {
  return decoder->forward(content, code);
}

torch::Tensor GeneratorImpl::translate(const torch::Tensor& images, const StyleCode& code) {
  return decode(encode(images), code);
}

void GeneratorImpl::freeze_plain_projections() {
  for (auto& p : decoder->adain) p->freeze_plain();
}

}  // namespace gla
