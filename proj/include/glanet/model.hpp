#pragma once

#include <torch/nn/module.h>
#include <torch/nn/pimpl.h>

#include "glanet/config.hpp"
#include "glanet/discriminator.hpp"
#include "glanet/generator.hpp"
#include "glanet/style_encoder.hpp"

namespace gla {

// All trainable networks under their checkpoint names: style_encoder.*, generator.*, discriminator.*.
class GlaNetImpl : public torch::nn::Module {
 public:
  explicit GlaNetImpl(const RunConfig& cfg);

  StyleEncoder style_encoder{nullptr};
  Generator generator{nullptr};
  Discriminator discriminator{nullptr};
};
TORCH_MODULE(GlaNet);

}  // namespace gla
