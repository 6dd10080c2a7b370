#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <torch/types.h>

#include "glanet/config.hpp"

namespace gla {

// Per-pixel relevance weights [H,W] in [0,1]. Never carries gradient.
struct AttentionMap {
  torch::Tensor weights;
};

class AttentionProvider {
 public:
  virtual ~AttentionProvider() = default;
  // image: [3,H,W] in [-1,1].
  virtual AttentionMap compute(const torch::Tensor& image) const = 0;
  virtual std::string id() const = 0;
};

// Min-max normalization to [0,1]; a (near-)constant input maps to zeros.
torch::Tensor minmax_normalize(const torch::Tensor& map, double eps = 1e-8);

// Normalized central-difference gradient magnitude of the channel-mean intensity
// (replicate borders). Deterministic and dependency-free.
class SaliencyAttention final : public AttentionProvider {
 public:
  AttentionMap compute(const torch::Tensor& image) const override;
  std::string id() const override { return "saliency_stub"; }
};

// Class-token attention of the final block of a self-supervised ViT
// (DINO/DeiT layout: patch_embed.*, cls_token, pos_embed, blocks.{i}.*),
// averaged over heads, bilinearly upsampled and min-max normalized.
class VitAttention final : public AttentionProvider {
 public:
  // Loads an array file; throws DataError naming the provider if it is missing or incomplete.
  VitAttention(const std::filesystem::path& weights, std::int64_t num_heads);
  VitAttention(std::map<std::string, torch::Tensor> weights, std::int64_t num_heads);

  AttentionMap compute(const torch::Tensor& image) const override;
  std::string id() const override { return "pretrained_vit"; }

  // Head-averaged class-token attention over the patch grid, [gh,gw], before upsampling.
  torch::Tensor patch_attention(const torch::Tensor& image) const;

  std::int64_t depth() const { return depth_; }
  std::int64_t patch_size() const { return patch_size_; }

 private:
  void init();
  const torch::Tensor& w(const std::string& name) const;

  std::map<std::string, torch::Tensor> weights_;
  std::int64_t num_heads_;
  std::int64_t depth_ = 0;
  std::int64_t patch_size_ = 0;
  std::int64_t dim_ = 0;
};

std::unique_ptr<AttentionProvider> make_attention_provider(const LocalConfig& cfg);

}  // namespace gla
