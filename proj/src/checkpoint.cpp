#include "glanet/checkpoint.hpp"

#include "glanet/array_file.hpp"
#include "glanet/errors.hpp"

namespace gla {

namespace {

constexpr std::string_view kOptimizerPrefix = "optimizer.";
constexpr std::string_view kRunningPrefix = "running_style.";

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ArrayFile file;
  file.metadata = {{"kind", "glanet.checkpoint"},
                   {"format_version", Checkpoint::kFormatVersion},
                   {"step", ckpt.step},
                   {"config", to_config_text(ckpt.config)}};
  for (const auto& [name, t] : ckpt.parameters) {
    if (starts_with(name, kOptimizerPrefix) || starts_with(name, kRunningPrefix))
      throw ConfigError("checkpoint parameter name collides with a reserved prefix: " + name);
    file.arrays.emplace(name, t);
  }
  for (const auto& [name, t] : ckpt.optimizer) file.arrays.emplace(std::string(kOptimizerPrefix) + name, t);
  if (ckpt.running_style) {
    file.arrays.emplace(std::string(kRunningPrefix) + "mu", ckpt.running_style->mu);
    file.arrays.emplace(std::string(kRunningPrefix) + "sigma", ckpt.running_style->sigma);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_array_file(path, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto file = read_array_file(path);
  const auto& meta = file.metadata;
  if (meta.value("kind", std::string()) != "glanet.checkpoint")
    throw DataError(path.string() + " is not a glanet checkpoint");
  if (meta.value("format_version", std::int64_t{-1}) != Checkpoint::kFormatVersion)
    throw DataError(path.string() + ": unsupported checkpoint format version");

  Checkpoint ckpt;
  ckpt.config = parse_config(meta.at("config").get<std::string>());
  ckpt.step = meta.at("step").get<std::int64_t>();
  std::optional<torch::Tensor> mu, sigma;
  for (auto& [name, t] : file.arrays) {
    if (starts_with(name, kOptimizerPrefix)) {
      ckpt.optimizer.emplace(name.substr(kOptimizerPrefix.size()), std::move(t));
    } else if (name == std::string(kRunningPrefix) + "mu") {
      mu = std::move(t);
    } else if (name == std::string(kRunningPrefix) + "sigma") {
      sigma = std::move(t);
    } else {
      ckpt.parameters.emplace(name, std::move(t));
    }
  }
  if (mu.has_value() != sigma.has_value()) throw DataError(path.string() + ": incomplete running style code");
  if (mu) ckpt.running_style = StyleCode{*mu, *sigma};
  return ckpt;
}

}  // namespace gla
