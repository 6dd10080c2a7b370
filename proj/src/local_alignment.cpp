#include "glanet/local_alignment.hpp"

#include <cmath>
#include <iostream>
#include <random>

#include <ATen/Dispatch.h>
#include <torch/torch.h>

#include "glanet/errors.hpp"
#include "glanet/rng.hpp"

namespace gla {

namespace F = torch::nn::functional;

torch::Tensor apply_attention(const torch::Tensor& x, const AttentionMap& attention) {
  const auto& a = attention.weights;
  if (a.dim() != 2 || x.dim() < 3 || x.size(-2) != a.size(0) || x.size(-1) != a.size(1))
    throw ConfigError("attention map shape does not match the image");
  return x * a.detach().to(x.scalar_type());
}

std::vector<QueryPoint> sample_queries(std::int64_t height, std::int64_t width, std::int64_t count,
                                       std::uint64_t seed) {
  if (height < 1 || width < 1 || count < 1) throw ConfigError("query sampling needs a non-empty grid and count");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> rows(0, height - 1), cols(0, width - 1);
  std::vector<QueryPoint> q(static_cast<std::size_t>(count));
  for (auto& p : q) {
    p.row = rows(rng);
    p.col = cols(rng);
  }
  return q;
}

namespace {

// Sum over dim 0 in index order (cumsum is a sequential scan), so results equal a
// plain per-channel loop bit for bit.
torch::Tensor ordered_channel_sum(const torch::Tensor& t) { return t.cumsum(0).select(0, t.size(0) - 1); }

// Correctly rounded square root (the vectorized kernel can be 1 ulp off).
// The gradient at 0 is taken as 0 so all-zero feature vectors stay finite.
struct ExactSqrt : torch::autograd::Function<ExactSqrt> {
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x) {
    auto out = x.detach().contiguous().clone();
    AT_DISPATCH_FLOATING_TYPES(out.scalar_type(), "exact_sqrt", [&] {
      auto* p = out.data_ptr<scalar_t>();
      for (std::int64_t i = 0; i < out.numel(); ++i) p[i] = std::sqrt(p[i]);
    });
    ctx->save_for_backward({out});
    return out;
  }
  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grad) {
    const auto out = ctx->get_saved_variables()[0];
    return {torch::where(out > 0, grad[0] / (2 * out), torch::zeros_like(out))};
  }
};

}  // namespace

SpatialCorrelativeMap spatial_correlative_map(const FeatureStack& stack, std::size_t layer,
                                              const std::vector<QueryPoint>& queries, std::int64_t patch_radius,
                                              std::int64_t sample) {
  if (queries.empty()) throw ConfigError("spatial correlative map needs at least one query point");
  if (layer >= stack.layers.size()) throw ConfigError("feature layer index out of range");
  if (patch_radius < 0) throw ConfigError("patch radius must be >= 0");
  const auto feats = stack.layers[layer].dim() == 4 ? stack.layers[layer][sample] : stack.layers[layer];
  const auto c = feats.size(0), h = feats.size(1), w = feats.size(2);
  const auto r = patch_radius;

  SpatialCorrelativeMap map;
  map.queries = queries;
  for (std::int64_t dy = -r; dy <= r; ++dy)
    for (std::int64_t dx = -r; dx <= r; ++dx) map.key_offsets.emplace_back(dy, dx);
  const auto k = static_cast<std::int64_t>(map.key_offsets.size());
  const auto q = static_cast<std::int64_t>(queries.size());

  // Zero padding makes clipped keys contribute exact zeros.
  const auto norm = ExactSqrt::apply(ordered_channel_sum(feats * feats));
  const auto unit = feats / norm.clamp_min(1e-12).unsqueeze(0);
  const auto padded = F::pad(unit, F::PadFuncOptions({r, r, r, r})).reshape({c, -1});
  const auto pw = w + 2 * r;

  std::vector<std::int64_t> key_index;
  std::vector<std::int64_t> center_index;
  key_index.reserve(static_cast<std::size_t>(q * k));
  auto valid = torch::zeros({q, k}, torch::kBool);
  auto va = valid.accessor<bool, 2>();
  for (std::int64_t i = 0; i < q; ++i) {
    const auto& p = queries[static_cast<std::size_t>(i)];
    if (p.row < 0 || p.row >= h || p.col < 0 || p.col >= w)
      throw ConfigError("query point outside the feature map");
    center_index.push_back((p.row + r) * pw + (p.col + r));
    for (std::int64_t j = 0; j < k; ++j) {
      const auto [dy, dx] = map.key_offsets[static_cast<std::size_t>(j)];
      key_index.push_back((p.row + r + dy) * pw + (p.col + r + dx));
      const auto ky = p.row + dy, kx = p.col + dx;
      va[i][j] = ky >= 0 && ky < h && kx >= 0 && kx < w;
    }
  }
  const auto keys = padded.index_select(1, torch::tensor(key_index, torch::kInt64)).view({c, q, k});
  const auto centers = padded.index_select(1, torch::tensor(center_index, torch::kInt64)).view({c, q, 1});
  map.rows = ordered_channel_sum(centers * keys);
  map.valid = valid;
  return map;
}

LocalLossOptions LocalLossOptions::from(const LocalConfig& cfg) {
  return {cfg.num_queries, cfg.patch_radius, cfg.layer_reduction};
}

LocalLossResult local_loss(const torch::Tensor& x, const torch::Tensor& y_hat, const AttentionMap& attention,
                           const FeatureExtractor& extractor, const LocalLossOptions& opts, std::uint64_t query_seed,
                           const std::optional<AttentionMap>& attention_yhat) {
  if (x.sizes() != y_hat.sizes()) throw ConfigError("local loss: x and y_hat shapes differ");
  const auto fx = extractor.extract(apply_attention(x, attention));
  const auto fy = extractor.extract(apply_attention(y_hat, attention_yhat ? *attention_yhat : attention));

  LocalLossResult result;
  std::vector<torch::Tensor> per_layer;
  for (std::size_t l = 0; l < fx.layers.size(); ++l) {
    const auto& layer = fx.layers[l];
    const auto queries = sample_queries(layer.size(-2), layer.size(-1), opts.num_queries,
                                        derive_seed(query_seed, {stream::kQueries, l}));
    const auto sx = spatial_correlative_map(fx, l, queries, opts.patch_radius).rows;
    const auto sy = spatial_correlative_map(fy, l, queries, opts.patch_radius).rows;
    const auto nx = sx.norm(2, 1);
    const auto ny = sy.norm(2, 1);
    const auto keep = (nx > 1e-12).logical_and(ny > 1e-12);
    const auto kept = keep.sum().item<std::int64_t>();
    result.used_rows += kept;
    result.skipped_rows += static_cast<std::int64_t>(queries.size()) - kept;
    if (kept == 0) continue;
    // Identical rows are exactly aligned; rounding in the quotient would otherwise leak ~1 ulp.
    const auto same = (sx == sy).all(1);
    const auto cos = torch::where(same, torch::ones_like(nx),
                                  ((sx * sy).sum(1) / (nx * ny).clamp_min(1e-24)).clamp(-1, 1));
    const auto idx = keep.nonzero().squeeze(1);
    per_layer.push_back((1 - cos.index_select(0, idx)).mean());
  }
  if (per_layer.empty()) {
    std::cerr << "warning: local loss has no rows with non-zero norm; returning 0\n";
    result.loss = (y_hat * 0).sum();
    return result;
  }
  const auto stacked = torch::stack(per_layer);
  result.loss = opts.reduction == LayerReduction::Mean ? stacked.mean() : stacked.sum();
  return result;
}

}  // namespace gla
