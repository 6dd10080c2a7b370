#pragma once

#include <string_view>

#include <torch/types.h>

#include "glanet/config.hpp"
#include "glanet/style_code.hpp"

namespace gla {

// Loss magnitudes are clamped to this bound.
inline constexpr double kLossClamp = 1e6;

struct GaussianPair {
  StyleCode source;
  StyleCode target;
};

// s = mu + sigma * noise. `noise` must have the code's shape (or broadcast to it).
torch::Tensor sample_reparam(const StyleCode& code, const torch::Tensor& noise);

// With s_y = sample_reparam(target, noise):
//   paper_literal: -sum_i (s_y_i - mu_x_i)^2 / (2 sigma_x_i^2)
//   nll:           the negation of the above
// Summed over dimensions, averaged over the batch.
torch::Tensor likelihood_loss(const GaussianPair& pair, const torch::Tensor& noise, LikelihoodMode mode);

// sum_i [ ln sigma_i + (1 + mu_i^2) / (2 sigma_i^2) - 1/2 ] = KL(N(0,1) || N(mu, sigma^2)),
// averaged over the batch.
torch::Tensor kl_unit_to_gauss(const StyleCode& code);

// paper_literal: -KL; standard: +KL.
torch::Tensor regularization_loss(const StyleCode& code, RegularizationMode mode);

struct GlobalLossTerms {
  torch::Tensor likelihood;
  torch::Tensor regularization;
  torch::Tensor total;  // lambda_l * likelihood + lambda_r * regularization
};

// The regularizer acts on the source code.
GlobalLossTerms global_loss_terms(const GaussianPair& pair, const torch::Tensor& noise, double lambda_l,
                                  double lambda_r, LikelihoodMode likelihood_mode,
                                  RegularizationMode regularization_mode);

torch::Tensor global_loss(const GaussianPair& pair, const torch::Tensor& noise, double lambda_l = 1.0,
                          double lambda_r = 1.0, LikelihoodMode likelihood_mode = LikelihoodMode::Nll,
                          RegularizationMode regularization_mode = RegularizationMode::Standard);

LikelihoodMode parse_likelihood_mode(std::string_view text);
RegularizationMode parse_regularization_mode(std::string_view text);

}  // namespace gla
