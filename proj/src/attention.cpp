#include "glanet/attention.hpp"

#include <cmath>

#include <torch/torch.h>

#include "glanet/array_file.hpp"
#include "glanet/errors.hpp"

namespace gla {

namespace F = torch::nn::functional;

namespace {

torch::Tensor check_image(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw ConfigError("attention provider expects an image [3,H,W]");
  return image.detach();
}

// [-1,1] -> ImageNet-normalized.
torch::Tensor imagenet_normalize(const torch::Tensor& image) {
  const auto mean = torch::tensor({0.485, 0.456, 0.406}, image.options()).view({3, 1, 1});
  const auto std = torch::tensor({0.229, 0.224, 0.225}, image.options()).view({3, 1, 1});
  return ((image + 1) / 2 - mean) / std;
}

}  // namespace

torch::Tensor minmax_normalize(const torch::Tensor& map, double eps) {
  const auto lo = map.min();
  const auto range = map.max() - lo;
  if (range.item<double>() < eps) return torch::zeros_like(map);
  return ((map - lo) / range).clamp(0, 1);
}

AttentionMap SaliencyAttention::compute(const torch::Tensor& image) const {
  const auto gray = check_image(image).mean(0);  // [H,W]
  const auto h = gray.size(0), w = gray.size(1);
  const auto padded = F::pad(gray.view({1, 1, h, w}), F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate))
                          .view({h + 2, w + 2});
  const auto gx = (padded.slice(0, 1, h + 1).slice(1, 2, w + 2) - padded.slice(0, 1, h + 1).slice(1, 0, w)) / 2;
  const auto gy = (padded.slice(0, 2, h + 2).slice(1, 1, w + 1) - padded.slice(0, 0, h).slice(1, 1, w + 1)) / 2;
  return {minmax_normalize((gx.pow(2) + gy.pow(2)).sqrt())};
}

VitAttention::VitAttention(const std::filesystem::path& weights, std::int64_t num_heads) : num_heads_(num_heads) {
  if (weights.empty() || !std::filesystem::exists(weights))
    throw DataError("attention provider pretrained_vit: weight file '" + weights.string() +
                    "' not found (set local.provider_weights)");
  auto file = read_array_file(weights);
  if (file.metadata.contains("num_heads")) num_heads_ = file.metadata["num_heads"].get<std::int64_t>();
  weights_ = std::move(file.arrays);
  init();
}

VitAttention::VitAttention(std::map<std::string, torch::Tensor> weights, std::int64_t num_heads)
    : weights_(std::move(weights)), num_heads_(num_heads) {
  init();
}

void VitAttention::init() {
  for (const char* key : {"cls_token", "pos_embed", "patch_embed.proj.weight", "patch_embed.proj.bias"})
    if (!weights_.count(key))
      throw DataError(std::string("attention provider pretrained_vit: weights lack '") + key + "'");
  while (weights_.count("blocks." + std::to_string(depth_) + ".attn.qkv.weight")) ++depth_;
  if (depth_ == 0) throw DataError("attention provider pretrained_vit: weights contain no transformer blocks");
  for (auto& [name, t] : weights_) t = t.to(torch::kFloat32);
  const auto& proj = w("patch_embed.proj.weight");
  dim_ = proj.size(0);
  patch_size_ = proj.size(2);
  if (num_heads_ < 1 || dim_ % num_heads_ != 0)
    throw ConfigError("attention provider pretrained_vit: embed dim " + std::to_string(dim_) +
                      " not divisible by " + std::to_string(num_heads_) + " heads");
}

const torch::Tensor& VitAttention::w(const std::string& name) const {
  const auto it = weights_.find(name);
  if (it == weights_.end()) throw DataError("attention provider pretrained_vit: weights lack '" + name + "'");
  return it->second;
}

torch::Tensor VitAttention::patch_attention(const torch::Tensor& image) const {
  torch::NoGradGuard no_grad;
  auto x = imagenet_normalize(check_image(image).to(torch::kFloat32)).unsqueeze(0);
  const auto gh = x.size(2) / patch_size_, gw = x.size(3) / patch_size_;
  if (gh == 0 || gw == 0) throw ConfigError("image smaller than the ViT patch size");
  x = x.slice(2, 0, gh * patch_size_).slice(3, 0, gw * patch_size_);

  auto tokens = F::conv2d(x, w("patch_embed.proj.weight"),
                          F::Conv2dFuncOptions().bias(w("patch_embed.proj.bias")).stride(patch_size_));
  tokens = tokens.flatten(2).transpose(1, 2);  // [1,n,D]

  // Resample patch position embeddings when the grid differs from training.
  auto pos = w("pos_embed").view({1, -1, dim_});
  auto pos_cls = pos.narrow(1, 0, 1);
  auto pos_patch = pos.narrow(1, 1, pos.size(1) - 1);
  const auto src = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(pos_patch.size(1)))));
  if (src * src != pos_patch.size(1)) throw DataError("attention provider pretrained_vit: non-square pos_embed");
  if (src != gh || src != gw) {
    pos_patch = F::interpolate(pos_patch.reshape({1, src, src, dim_}).permute({0, 3, 1, 2}),
                               F::InterpolateFuncOptions()
                                   .size(std::vector<std::int64_t>{gh, gw})
                                   .mode(torch::kBicubic)
                                   .align_corners(false))
                    .permute({0, 2, 3, 1})
                    .reshape({1, gh * gw, dim_});
  }
  auto z = torch::cat({w("cls_token").view({1, 1, dim_}), tokens}, 1) + torch::cat({pos_cls, pos_patch}, 1);

  const auto head_dim = dim_ / num_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  auto ln = [&](const torch::Tensor& t, const std::string& prefix) {
    return F::layer_norm(t, F::LayerNormFuncOptions({dim_}).weight(w(prefix + ".weight")).bias(w(prefix + ".bias")).eps(1e-6));
  };
  auto linear = [&](const torch::Tensor& t, const std::string& prefix) {
    return F::linear(t, w(prefix + ".weight"), w(prefix + ".bias"));
  };

  const auto n = z.size(1);
  for (std::int64_t i = 0; i < depth_; ++i) {
    const auto b = "blocks." + std::to_string(i);
    auto qkv = linear(ln(z, b + ".norm1"), b + ".attn.qkv").reshape({1, n, 3, num_heads_, head_dim}).permute(
        {2, 0, 3, 1, 4});
    auto attn = torch::softmax(torch::matmul(qkv[0], qkv[1].transpose(-2, -1)) * scale, -1);  // [1,h,n,n]
    if (i == depth_ - 1) {
      return attn[0].select(1, 0).narrow(1, 1, n - 1).mean(0).view({gh, gw});
    }
    auto mixed = torch::matmul(attn, qkv[2]).transpose(1, 2).reshape({1, n, dim_});
    z = z + linear(mixed, b + ".attn.proj");
    z = z + linear(F::gelu(linear(ln(z, b + ".norm2"), b + ".mlp.fc1")), b + ".mlp.fc2");
  }
  return {};  // unreachable: depth_ >= 1
}

AttentionMap VitAttention::compute(const torch::Tensor& image) const {
  const auto grid = patch_attention(image);
  const auto up = F::interpolate(grid.view({1, 1, grid.size(0), grid.size(1)}),
                                 F::InterpolateFuncOptions()
                                     .size(std::vector<std::int64_t>{image.size(1), image.size(2)})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  return {minmax_normalize(up.view({image.size(1), image.size(2)})).to(image.scalar_type())};
}

std::unique_ptr<AttentionProvider> make_attention_provider(const LocalConfig& cfg) {
  switch (cfg.provider) {
    case AttentionProviderKind::SaliencyStub: return std::make_unique<SaliencyAttention>();
    case AttentionProviderKind::PretrainedVit:
      return std::make_unique<VitAttention>(cfg.provider_weights, cfg.provider_heads);
  }
  throw ConfigError("unknown attention provider");
}

}  // namespace gla
