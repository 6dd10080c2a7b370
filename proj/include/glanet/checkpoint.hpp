#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <torch/types.h>

#include "glanet/config.hpp"
#include "glanet/style_code.hpp"

namespace gla {

// Everything needed to resume training or run inference. Stored as an array file:
//   model arrays under their module names (style_encoder.*, generator.*, discriminator.*)
//   optimizer.{generator,discriminator}.<param>.{exp_avg,exp_avg_sq,step}
//   running_style.{mu,sigma}
// with metadata {kind, format_version, step, config}.
struct Checkpoint {
  static constexpr std::int64_t kFormatVersion = 1;

  RunConfig config;
  std::int64_t step = 0;
  std::map<std::string, torch::Tensor> parameters;
  std::map<std::string, torch::Tensor> optimizer;
  std::optional<StyleCode> running_style;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gla
