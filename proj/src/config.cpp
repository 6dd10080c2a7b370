#include "glanet/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "glanet/errors.hpp"

namespace gla {

namespace {

template <typename E>
using EnumTable = std::vector<std::pair<std::string_view, E>>;

const EnumTable<Domain> kDomains = {{"source", Domain::Source}, {"target", Domain::Target}};
const EnumTable<Motif> kMotifs = {{"circles_to_squares", Motif::CirclesToSquares},
                                  {"solid_to_striped", Motif::SolidToStriped}};
const EnumTable<StyleReadout> kReadouts = {{"mean_pool", StyleReadout::MeanPool},
                                           {"class_token", StyleReadout::ClassToken}};
const EnumTable<GeneratorLossMode> kGanModes = {{"saturating", GeneratorLossMode::Saturating},
                                                {"non_saturating", GeneratorLossMode::NonSaturating}};
const EnumTable<LikelihoodMode> kLikelihoodModes = {{"paper_literal", LikelihoodMode::PaperLiteral},
                                                    {"nll", LikelihoodMode::Nll}};
const EnumTable<RegularizationMode> kRegularizationModes = {
    {"paper_literal", RegularizationMode::PaperLiteral}, {"standard", RegularizationMode::Standard}};
const EnumTable<AttentionProviderKind> kProviders = {{"saliency_stub", AttentionProviderKind::SaliencyStub},
                                                     {"pretrained_vit", AttentionProviderKind::PretrainedVit}};
const EnumTable<ExtractorKind> kExtractors = {{"random", ExtractorKind::Random}, {"vgg16", ExtractorKind::Vgg16}};
const EnumTable<LayerReduction> kReductions = {{"mean", LayerReduction::Mean}, {"sum", LayerReduction::Sum}};

template <typename E>
E parse_enum(const EnumTable<E>& table, std::string_view key, std::string_view text) {
  for (const auto& [name, value] : table)
    if (name == text) return value;
  std::string allowed;
  for (const auto& [name, value] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw ConfigError(std::string(key) + ": unknown value '" + std::string(text) + "' (expected one of: " +
                    allowed + ")");
}

template <typename E>
std::string_view enum_name(const EnumTable<E>& table, E value) {
  for (const auto& [name, v] : table)
    if (v == value) return name;
  return "?";
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  T value{};
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (ec != std::errc() || ptr != end || t.empty())
    throw ConfigError(std::string(key) + ": cannot parse '" + t + "' as a number");
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(std::string(key) + ": cannot parse '" + t + "' as a boolean");
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

struct Binding {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Section, typename Field>
Binding bind_field(std::string key, Section RunConfig::*section, Field Section::*field) {
  Binding b;
  b.key = key;
  b.set = [key, section, field](RunConfig& c, std::string_view v) {
    auto& slot = c.*section.*field;
    if constexpr (std::is_same_v<Field, bool>) {
      slot = parse_bool(key, v);
    } else if constexpr (std::is_same_v<Field, std::string>) {
      slot = trim(v);
    } else {
      slot = parse_number<Field>(key, v);
    }
  };
  b.get = [section, field](const RunConfig& c) -> std::string {
    const auto& slot = c.*section.*field;
    if constexpr (std::is_same_v<Field, bool>) {
      return slot ? "true" : "false";
    } else if constexpr (std::is_same_v<Field, std::string>) {
      return slot;
    } else if constexpr (std::is_floating_point_v<Field>) {
      return format_double(slot);
    } else {
      return std::to_string(slot);
    }
  };
  return b;
}

template <typename Section, typename E>
Binding bind_enum(std::string key, Section RunConfig::*section, E Section::*field, const EnumTable<E>& table) {
  Binding b;
  b.key = key;
  b.set = [key, section, field, &table](RunConfig& c, std::string_view v) {
    c.*section.*field = parse_enum(table, key, trim(v));
  };
  b.get = [section, field, &table](const RunConfig& c) {
    return std::string(enum_name(table, c.*section.*field));
  };
  return b;
}

const std::vector<Binding>& bindings() {
  using R = RunConfig;
  static const std::vector<Binding> table = {
      bind_field("data.resolution", &R::data, &DataConfig::resolution),
      bind_field("data.source_dir", &R::data, &DataConfig::source_dir),
      bind_field("data.target_dir", &R::data, &DataConfig::target_dir),
      bind_field("data.synthetic_count", &R::data, &DataConfig::synthetic_count),
      bind_enum("data.motif", &R::data, &DataConfig::motif, kMotifs),
      bind_field("data.seed", &R::data, &DataConfig::seed),

      bind_field("style.patch_size", &R::style, &StyleConfig::patch_size),
      bind_field("style.embed_dim", &R::style, &StyleConfig::embed_dim),
      bind_field("style.token_hidden", &R::style, &StyleConfig::token_hidden),
      bind_field("style.channel_hidden", &R::style, &StyleConfig::channel_hidden),
      bind_field("style.depth", &R::style, &StyleConfig::depth),
      bind_field("style.code_dim", &R::style, &StyleConfig::code_dim),
      bind_enum("style.readout", &R::style, &StyleConfig::readout, kReadouts),
      bind_field("style.sigma_floor", &R::style, &StyleConfig::sigma_floor),

      bind_field("generator.depth", &R::generator, &GeneratorConfig::depth),
      bind_field("generator.base_channels", &R::generator, &GeneratorConfig::base_channels),
      bind_field("generator.channel_cap", &R::generator, &GeneratorConfig::channel_cap),

      bind_field("gan.base_channels", &R::gan, &GanConfig::base_channels),
      bind_field("gan.blocks", &R::gan, &GanConfig::blocks),
      bind_enum("gan.generator_mode", &R::gan, &GanConfig::generator_mode, kGanModes),

      bind_field("global.lambda_l", &R::global, &GlobalConfig::lambda_l),
      bind_field("global.lambda_r", &R::global, &GlobalConfig::lambda_r),
      bind_enum("global.likelihood_mode", &R::global, &GlobalConfig::likelihood_mode, kLikelihoodModes),
      bind_enum("global.regularization_mode", &R::global, &GlobalConfig::regularization_mode,
                kRegularizationModes),

      bind_enum("local.provider", &R::local, &LocalConfig::provider, kProviders),
      bind_field("local.provider_weights", &R::local, &LocalConfig::provider_weights),
      bind_field("local.provider_heads", &R::local, &LocalConfig::provider_heads),
      bind_enum("local.extractor", &R::local, &LocalConfig::extractor, kExtractors),
      bind_field("local.extractor_weights", &R::local, &LocalConfig::extractor_weights),
      bind_field("local.extractor_seed", &R::local, &LocalConfig::extractor_seed),
      bind_field("local.num_queries", &R::local, &LocalConfig::num_queries),
      bind_field("local.patch_radius", &R::local, &LocalConfig::patch_radius),
      bind_enum("local.layer_reduction", &R::local, &LocalConfig::layer_reduction, kReductions),
      bind_field("local.recompute_attention", &R::local, &LocalConfig::recompute_attention),

      bind_field("trainer.lambda_global", &R::trainer, &TrainerConfig::lambda_global),
      bind_field("trainer.lambda_local", &R::trainer, &TrainerConfig::lambda_local),
      bind_field("trainer.lr", &R::trainer, &TrainerConfig::lr),
      bind_field("trainer.beta1", &R::trainer, &TrainerConfig::beta1),
      bind_field("trainer.beta2", &R::trainer, &TrainerConfig::beta2),
      bind_field("trainer.batch", &R::trainer, &TrainerConfig::batch),
      bind_field("trainer.epochs", &R::trainer, &TrainerConfig::epochs),
      bind_field("trainer.max_steps", &R::trainer, &TrainerConfig::max_steps),
      bind_field("trainer.seed", &R::trainer, &TrainerConfig::seed),
      bind_field("trainer.use_adain_new", &R::trainer, &TrainerConfig::use_adain_new),
      bind_field("trainer.use_global", &R::trainer, &TrainerConfig::use_global),
      bind_field("trainer.use_local", &R::trainer, &TrainerConfig::use_local),
      bind_field("trainer.style_momentum", &R::trainer, &TrainerConfig::style_momentum),
      bind_field("trainer.sample_every", &R::trainer, &TrainerConfig::sample_every),
      bind_field("trainer.checkpoint_every_epoch", &R::trainer, &TrainerConfig::checkpoint_every_epoch),

      bind_enum("metrics.extractor", &R::metrics, &MetricsConfig::extractor, kExtractors),
      bind_field("metrics.extractor_weights", &R::metrics, &MetricsConfig::extractor_weights),
      bind_field("metrics.seed", &R::metrics, &MetricsConfig::seed),
      bind_field("metrics.kid_degree", &R::metrics, &MetricsConfig::kid_degree),
      bind_field("metrics.dc_k", &R::metrics, &MetricsConfig::dc_k),
  };
  return table;
}

const Binding& find_binding(std::string_view key) {
  const auto& table = bindings();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) { return b.key == key; });
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return *it;
}

void require(bool cond, const std::string& message) {
  if (!cond) throw ConfigError(message);
}

}  // namespace

Domain parse_domain(std::string_view text) { return parse_enum(kDomains, "domain", text); }

std::string_view to_string(Domain d) { return enum_name(kDomains, d); }

void RunConfig::validate() const {
  require(data.resolution >= 8, "data.resolution must be >= 8");
  require(data.synthetic_count >= 1, "data.synthetic_count must be >= 1");
  require(style.patch_size >= 1 && data.resolution % style.patch_size == 0,
          "data.resolution must be divisible by style.patch_size");
  require(style.embed_dim >= 1 && style.token_hidden >= 1 && style.channel_hidden >= 1,
          "style dimensions must be positive");
  require(style.depth >= 0, "style.depth must be >= 0");
  require(style.code_dim >= 1, "style.code_dim (N) must be >= 1");
  require(style.sigma_floor > 0.0, "style.sigma_floor must be positive");
  require(generator.depth >= 1, "generator.depth must be >= 1");
  require(data.resolution % (std::int64_t{1} << generator.depth) == 0,
          "data.resolution must be divisible by 2^generator.depth");
  require(generator.base_channels >= 1 && generator.channel_cap >= generator.base_channels,
          "generator channel sizes invalid");
  require(gan.base_channels >= 1 && gan.blocks >= 1, "gan sizes invalid");
  require(global.lambda_l >= 0 && global.lambda_r >= 0, "global weights must be >= 0");
  require(trainer.lambda_global >= 0 && trainer.lambda_local >= 0, "trainer weights must be >= 0");
  require(trainer.lr > 0, "trainer.lr must be positive");
  require(trainer.beta1 >= 0 && trainer.beta1 < 1 && trainer.beta2 >= 0 && trainer.beta2 < 1,
          "trainer betas must lie in [0,1)");
  require(trainer.batch >= 1, "trainer.batch must be >= 1");
  require(trainer.epochs >= 1, "trainer.epochs must be >= 1");
  require(trainer.max_steps >= 0, "trainer.max_steps must be >= 0");
  require(trainer.style_momentum >= 0 && trainer.style_momentum < 1, "trainer.style_momentum must lie in [0,1)");
  require(trainer.sample_every >= 0, "trainer.sample_every must be >= 0");
  require(local.num_queries >= 1, "local.num_queries must be >= 1");
  require(local.patch_radius >= 0, "local.patch_radius must be >= 0");
  require(local.provider_heads >= 1, "local.provider_heads must be >= 1");
  require(metrics.kid_degree >= 1, "metrics.kid_degree must be >= 1");
  require(metrics.dc_k >= 1, "metrics.dc_k must be >= 1");
}

void set_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_binding(key).set(cfg, value);
}

std::string get_value(const RunConfig& cfg, std::string_view key) { return find_binding(key).get(cfg); }

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  set_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body) set_value(cfg, section + "." + key, value.data());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  std::string current;
  for (const auto& b : bindings()) {
    const auto dot = b.key.find('.');
    const std::string section = b.key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << b.key.substr(dot + 1) << " = " << b.get(cfg) << '\n';
  }
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& b : bindings()) keys.push_back(b.key);
  return keys;
}

}  // namespace gla
