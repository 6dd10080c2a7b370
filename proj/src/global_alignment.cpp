#include "glanet/global_alignment.hpp"

#include <string>

#include <torch/torch.h>

#include "glanet/errors.hpp"

namespace gla {

namespace {

// Sum over the code dimension, mean over any leading batch dimension.
torch::Tensor reduce(const torch::Tensor& per_dim) {
  auto summed = per_dim.sum(-1);
  return summed.dim() == 0 ? summed : summed.mean();
}

torch::Tensor clamp_magnitude(const torch::Tensor& v) { return v.clamp(-kLossClamp, kLossClamp); }

}  // namespace

torch::Tensor sample_reparam(const StyleCode& code, const torch::Tensor& noise) {
  if (noise.size(-1) != code.dim())
    throw ConfigError("reparameterization noise has length " + std::to_string(noise.size(-1)) + ", code has " +
                      std::to_string(code.dim()));
  return code.mu + code.sigma * noise;
}

torch::Tensor likelihood_loss(const GaussianPair& pair, const torch::Tensor& noise, LikelihoodMode mode) {
  if (pair.source.dim() != pair.target.dim()) throw ConfigError("Gaussian pair has mismatched lengths");
  const auto s = sample_reparam(pair.target, noise);
  const auto& mu = pair.source.mu;
  const auto& sigma = pair.source.sigma;
  const auto log_lik = -reduce((s - mu).pow(2) / (2 * sigma.pow(2)));
  return clamp_magnitude(mode == LikelihoodMode::PaperLiteral ? log_lik : -log_lik);
}

torch::Tensor kl_unit_to_gauss(const StyleCode& code) {
  const auto& mu = code.mu;
  const auto& sigma = code.sigma;
  return reduce(torch::log(sigma) + (1 + mu.pow(2)) / (2 * sigma.pow(2)) - 0.5);
}

torch::Tensor regularization_loss(const StyleCode& code, RegularizationMode mode) {
  const auto kl = kl_unit_to_gauss(code);
  return clamp_magnitude(mode == RegularizationMode::PaperLiteral ? -kl : kl);
}

GlobalLossTerms global_loss_terms(const GaussianPair& pair, const torch::Tensor& noise, double lambda_l,
                                  double lambda_r, LikelihoodMode likelihood_mode,
                                  RegularizationMode regularization_mode) {
  GlobalLossTerms t;
  t.likelihood = likelihood_loss(pair, noise, likelihood_mode);
  t.regularization = regularization_loss(pair.source, regularization_mode);
  t.total = lambda_l * t.likelihood + lambda_r * t.regularization;
  return t;
}

torch::Tensor global_loss(const GaussianPair& pair, const torch::Tensor& noise, double lambda_l, double lambda_r,
                          LikelihoodMode likelihood_mode, RegularizationMode regularization_mode) {
  return global_loss_terms(pair, noise, lambda_l, lambda_r, likelihood_mode, regularization_mode).total;
}

LikelihoodMode parse_likelihood_mode(std::string_view text) {
  if (text == "paper_literal") return LikelihoodMode::PaperLiteral;
  if (text == "nll") return LikelihoodMode::Nll;
  throw ConfigError("unknown likelihood mode '" + std::string(text) + "'");
}

RegularizationMode parse_regularization_mode(std::string_view text) {
  if (text == "paper_literal") return RegularizationMode::PaperLiteral;
  if (text == "standard") return RegularizationMode::Standard;
  throw ConfigError("unknown regularization mode '" + std::string(text) + "'");
}

}  // namespace gla
