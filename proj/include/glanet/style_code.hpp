#pragma once

#include <torch/types.h>

namespace gla {

inline constexpr double kSigmaFloor = 1e-4;

// Diagonal Gaussian style parameters; mu and sigma are [B,N] (or [N]).
struct StyleCode {
  torch::Tensor mu;
  torch::Tensor sigma;

  std::int64_t dim() const { return mu.size(-1); }

  // Throws ConfigError unless shapes agree and sigma >= floor everywhere.
  void validate(double floor = kSigmaFloor) const;

  StyleCode detach() const { return {mu.detach(), sigma.detach()}; }

  // (mu || sigma) along the last dimension.
  torch::Tensor concat() const;
};

}  // namespace gla
