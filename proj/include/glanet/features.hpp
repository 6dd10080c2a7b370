#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <torch/types.h>

#include "glanet/config.hpp"

namespace gla {

// One feature tensor per tap layer, each [B,C,h,w].
struct FeatureStack {
  std::vector<torch::Tensor> layers;
  std::vector<std::string> tap_ids;
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  // images: [B,C,H,W] (or [C,H,W]). Differentiable w.r.t. the input; weights are frozen.
  virtual FeatureStack extract(const torch::Tensor& images) const = 0;
  virtual std::string id() const = 0;
};

// 3x3 conv weights plus bias, applied with ReLU.
struct ConvLayer {
  torch::Tensor weight;
  torch::Tensor bias;
  std::int64_t stride = 1;
};

// Fixed-seed random conv stack with taps at strides 2, 4 and 8:
//   tap 1: relu(conv s2)
//   tap 2: relu(conv s1) -> relu(conv s2)
//   tap 3: relu(conv s1) -> relu(conv s2)
// Kaiming-normal weights, zero biases.
class RandomConvExtractor final : public FeatureExtractor {
 public:
  explicit RandomConvExtractor(std::uint64_t seed, std::int64_t in_channels = 3,
                               std::vector<std::int64_t> widths = {32, 64, 128});

  FeatureStack extract(const torch::Tensor& images) const override;
  std::string id() const override;

  // stages()[k] lists the convolutions ending at tap k.
  const std::vector<std::vector<ConvLayer>>& stages() const { return stages_; }

 private:
  std::uint64_t seed_;
  std::vector<std::vector<ConvLayer>> stages_;
};

// ImageNet VGG16 features (torchvision names features.{i}.weight/bias), tapped
// after the ReLUs of the 4th, 7th and 9th convolutions.
class Vgg16Extractor final : public FeatureExtractor {
 public:
  explicit Vgg16Extractor(const std::filesystem::path& weights);
  explicit Vgg16Extractor(const std::map<std::string, torch::Tensor>& weights);

  FeatureStack extract(const torch::Tensor& images) const override;
  std::string id() const override { return "vgg16:conv2d_4,7,9"; }

 private:
  void init(const std::map<std::string, torch::Tensor>& weights);

  std::vector<ConvLayer> convs_;  // first nine convolutions
};

std::unique_ptr<FeatureExtractor> make_feature_extractor(ExtractorKind kind, const std::string& weights,
                                                         std::uint64_t seed);

}  // namespace gla
