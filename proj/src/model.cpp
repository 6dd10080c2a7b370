#include "glanet/model.hpp"

#include <torch/torch.h>

#include "glanet/rng.hpp"

namespace gla {

GlaNetImpl::GlaNetImpl(const RunConfig& cfg) {
  cfg.validate();
  torch::manual_seed(derive_seed(cfg.trainer.seed, {stream::kInit}));
  style_encoder = register_module("style_encoder", StyleEncoder(StyleEncoderOptions::from(cfg)));
  generator = register_module("generator", Generator(GeneratorOptions::from(cfg)));
  discriminator = register_module("discriminator", Discriminator(DiscriminatorOptions::from(cfg)));
  if (!cfg.trainer.use_adain_new) generator->freeze_plain_projections();
}

}  // namespace gla
