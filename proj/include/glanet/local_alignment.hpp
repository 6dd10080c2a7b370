#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <torch/types.h>

#include "glanet/attention.hpp"
#include "glanet/config.hpp"
#include "glanet/features.hpp"

namespace gla {

// x * A broadcast over channels; A is treated as a constant. x is [C,H,W] or [B,C,H,W].
torch::Tensor apply_attention(const torch::Tensor& x, const AttentionMap& attention);

struct QueryPoint {
  std::int64_t row;
  std::int64_t col;
};

// Uniform query positions on an h x w grid.
std::vector<QueryPoint> sample_queries(std::int64_t height, std::int64_t width, std::int64_t count,
                                       std::uint64_t seed);

// For each query q, rows[q][k] = <f(q), f(q + offset_k)> over the (2r+1)^2 patch
// around q, using L2-normalized feature vectors. Keys falling outside the map are
// clipped: their entries are 0 and valid[q][k] is false.
struct SpatialCorrelativeMap {
  torch::Tensor rows;   // [Q,K]
  torch::Tensor valid;  // [Q,K] bool
  std::vector<QueryPoint> queries;
  std::vector<std::pair<std::int64_t, std::int64_t>> key_offsets;  // (dy, dx), row-major
};

SpatialCorrelativeMap spatial_correlative_map(const FeatureStack& stack, std::size_t layer,
                                              const std::vector<QueryPoint>& queries, std::int64_t patch_radius,
                                              std::int64_t sample = 0);

struct LocalLossOptions {
  std::int64_t num_queries = 256;
  std::int64_t patch_radius = 4;
  LayerReduction reduction = LayerReduction::Mean;

  static LocalLossOptions from(const LocalConfig& cfg);
};

struct LocalLossResult {
  torch::Tensor loss;  // scalar
  std::int64_t used_rows = 0;
  std::int64_t skipped_rows = 0;
};

// Mean over layers (or sum) of the mean over queries of 1 - cos(S_x row, S_yhat row).
// S_x comes from the attention-weighted x, S_yhat from the attention-weighted y_hat
// (with `attention_yhat` when given, otherwise the same map). Rows where either side
// has zero norm are skipped; if every row is skipped the loss is 0 and a warning is printed.
// x, y_hat: [3,H,W] or [1,3,H,W].
LocalLossResult local_loss(const torch::Tensor& x, const torch::Tensor& y_hat, const AttentionMap& attention,
                           const FeatureExtractor& extractor, const LocalLossOptions& opts, std::uint64_t query_seed,
                           const std::optional<AttentionMap>& attention_yhat = std::nullopt);

}  // namespace gla
