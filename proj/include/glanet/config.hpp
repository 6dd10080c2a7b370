#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gla {

enum class Domain { Source, Target };

enum class Motif { CirclesToSquares, SolidToStriped };
enum class StyleReadout { MeanPool, ClassToken };
enum class GeneratorLossMode { Saturating, NonSaturating };
enum class LikelihoodMode { PaperLiteral, Nll };
enum class RegularizationMode { PaperLiteral, Standard };
enum class AttentionProviderKind { SaliencyStub, PretrainedVit };
enum class ExtractorKind { Random, Vgg16 };
enum class LayerReduction { Mean, Sum };

Domain parse_domain(std::string_view text);
std::string_view to_string(Domain d);

struct DataConfig {
  std::int64_t resolution = 64;
  // Empty directories select the synthetic corpus.
  std::string source_dir;
  std::string target_dir;
  std::int64_t synthetic_count = 8;
  Motif motif = Motif::CirclesToSquares;
  std::uint64_t seed = 7;
};

struct StyleConfig {
  std::int64_t patch_size = 8;
  std::int64_t embed_dim = 128;
  std::int64_t token_hidden = 256;
  std::int64_t channel_hidden = 256;
  std::int64_t depth = 1;
  std::int64_t code_dim = 32;
  StyleReadout readout = StyleReadout::MeanPool;
  double sigma_floor = 1e-4;
};

struct GeneratorConfig {
  std::int64_t depth = 3;
  std::int64_t base_channels = 64;
  std::int64_t channel_cap = 256;
};

struct GanConfig {
  std::int64_t base_channels = 64;
  std::int64_t blocks = 3;
  GeneratorLossMode generator_mode = GeneratorLossMode::NonSaturating;
};

struct GlobalConfig {
  double lambda_l = 1.0;
  double lambda_r = 1.0;
  LikelihoodMode likelihood_mode = LikelihoodMode::Nll;
  RegularizationMode regularization_mode = RegularizationMode::Standard;
};

struct LocalConfig {
  AttentionProviderKind provider = AttentionProviderKind::SaliencyStub;
  std::string provider_weights;
  std::int64_t provider_heads = 6;
  ExtractorKind extractor = ExtractorKind::Random;
  std::string extractor_weights;
  std::uint64_t extractor_seed = 1234;
  std::int64_t num_queries = 256;
  std::int64_t patch_radius = 4;
  LayerReduction layer_reduction = LayerReduction::Mean;
  // Experimental: recompute the attention map on the translated image.
  bool recompute_attention = false;
};

struct TrainerConfig {
  double lambda_global = 1.0;
  double lambda_local = 10.0;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::int64_t batch = 1;
  std::int64_t epochs = 20;
  // When > 0, the run length in steps, overriding epochs.
  std::int64_t max_steps = 0;
  std::uint64_t seed = 0;
  bool use_adain_new = true;
  bool use_global = true;
  bool use_local = true;
  double style_momentum = 0.99;
  std::int64_t sample_every = 100;
  bool checkpoint_every_epoch = true;
};

struct MetricsConfig {
  ExtractorKind extractor = ExtractorKind::Random;
  std::string extractor_weights;
  std::uint64_t seed = 99;
  std::int64_t kid_degree = 3;
  std::int64_t dc_k = 5;
};

struct RunConfig {
  DataConfig data;
  StyleConfig style;
  GeneratorConfig generator;
  GanConfig gan;
  GlobalConfig global;
  LocalConfig local;
  TrainerConfig trainer;
  MetricsConfig metrics;

  // Throws ConfigError on any violated invariant.
  void validate() const;
};

// Sectioned key/value text ("[trainer]\nlambda_local = 10"). Unknown keys are rejected.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Applies "section.key=value".
void apply_override(RunConfig& cfg, std::string_view assignment);
void set_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& cfg, std::string_view key);

// Complete resolved snapshot; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace gla
