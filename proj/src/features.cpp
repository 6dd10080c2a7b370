#include "glanet/features.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "glanet/array_file.hpp"
#include "glanet/errors.hpp"
#include "glanet/rng.hpp"

namespace gla {

namespace F = torch::nn::functional;

namespace {

torch::Tensor as_batch(const torch::Tensor& images) {
  if (images.dim() == 4) return images;
  if (images.dim() == 3) return images.unsqueeze(0);
  throw ConfigError("feature extractor expects [B,C,H,W] or [C,H,W]");
}

torch::Tensor apply(const ConvLayer& layer, const torch::Tensor& x) {
  return torch::relu(F::conv2d(x, layer.weight.to(x.scalar_type()),
                               F::Conv2dFuncOptions().bias(layer.bias.to(x.scalar_type())).stride(layer.stride).padding(1)));
}

}  // namespace

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, std::int64_t in_channels,
                                         std::vector<std::int64_t> widths)
    : seed_(seed) {
  if (widths.size() != 3) throw ConfigError("random extractor needs three tap widths");
  auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(seed, {stream::kInit}));
  auto make = [&](std::int64_t in, std::int64_t out, std::int64_t stride) {
    const double std = std::sqrt(2.0 / static_cast<double>(in * 9));
    return ConvLayer{torch::randn({out, in, 3, 3}, gen, torch::kFloat32) * std, torch::zeros({out}), stride};
  };
  stages_.push_back({make(in_channels, widths[0], 2)});
  stages_.push_back({make(widths[0], widths[1], 1), make(widths[1], widths[1], 2)});
  stages_.push_back({make(widths[1], widths[2], 1), make(widths[2], widths[2], 2)});
}

std::string RandomConvExtractor::id() const { return "random_conv:seed=" + std::to_string(seed_); }

FeatureStack RandomConvExtractor::extract(const torch::Tensor& images) const {
  FeatureStack stack;
  auto h = as_batch(images);
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    for (const auto& layer : stages_[k]) h = apply(layer, h);
    stack.layers.push_back(h);
    stack.tap_ids.push_back("tap" + std::to_string(k + 1));
  }
  return stack;
}

namespace {

// torchvision vgg16.features indices of the first nine convolutions; pools follow 2, 4 and 7.
constexpr std::int64_t kVggConvIndex[9] = {0, 2, 5, 7, 10, 12, 14, 17, 19};

}  // namespace

Vgg16Extractor::Vgg16Extractor(const std::filesystem::path& weights) {
  if (weights.empty() || !std::filesystem::exists(weights))
    throw DataError("feature extractor vgg16: weight file '" + weights.string() +
                    "' not found (set local.extractor_weights / metrics.extractor_weights)");
  init(read_array_file(weights).arrays);
}

Vgg16Extractor::Vgg16Extractor(const std::map<std::string, torch::Tensor>& weights) { init(weights); }

void Vgg16Extractor::init(const std::map<std::string, torch::Tensor>& weights) {
  for (auto idx : kVggConvIndex) {
    const auto prefix = "features." + std::to_string(idx);
    const auto w = weights.find(prefix + ".weight");
    const auto b = weights.find(prefix + ".bias");
    if (w == weights.end() || b == weights.end())
      throw DataError("feature extractor vgg16: weights lack '" + prefix + ".weight/bias'");
    convs_.push_back({w->second.to(torch::kFloat32), b->second.to(torch::kFloat32), 1});
  }
}

FeatureStack Vgg16Extractor::extract(const torch::Tensor& images) const {
  auto x = as_batch(images);
  const auto mean = torch::tensor({0.485, 0.456, 0.406}, x.options()).view({1, 3, 1, 1});
  const auto std = torch::tensor({0.229, 0.224, 0.225}, x.options()).view({1, 3, 1, 1});
  auto h = ((x + 1) / 2 - mean) / std;
  FeatureStack stack;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = apply(convs_[i], h);
    if (i == 3 || i == 6 || i == 8) {
      stack.layers.push_back(h);
      stack.tap_ids.push_back("conv2d_" + std::to_string(i + 1));
    }
    if (i == 1 || i == 3 || i == 6) h = F::max_pool2d(h, F::MaxPool2dFuncOptions(2).stride(2));
  }
  return stack;
}

std::unique_ptr<FeatureExtractor> make_feature_extractor(ExtractorKind kind, const std::string& weights,
                                                         std::uint64_t seed) {
  switch (kind) {
    case ExtractorKind::Random: return std::make_unique<RandomConvExtractor>(seed);
    case ExtractorKind::Vgg16: return std::make_unique<Vgg16Extractor>(weights);
  }
  throw ConfigError("unknown feature extractor");
}

}  // namespace gla
