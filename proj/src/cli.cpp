#include "glanet/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "glanet/attention.hpp"
#include "glanet/checkpoint.hpp"
#include "glanet/config.hpp"
#include "glanet/data.hpp"
#include "glanet/errors.hpp"
#include "glanet/features.hpp"
#include "glanet/image_io.hpp"
#include "glanet/metrics.hpp"
#include "glanet/trainer.hpp"

namespace fs = std::filesystem;

namespace gla::cli {
namespace {

constexpr const char* kSentinel = "INCOMPLETE";
constexpr const char* kSnapshot = "config.ini";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Config file (sectioned key = value)");
  cmd->add_option("--set", c.overrides, "Override, section.key=value (repeatable)");
  cmd->add_option("--out", c.out, "Output directory (default: $GLANET_OUTPUT_ROOT/<command>)");
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  if (const char* root = std::getenv("GLANET_OUTPUT_ROOT"); root && *root) return fs::path(root) / command;
  return fs::path("runs") / command;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

// Marks an output directory as partial until the command finishes.
class Sentinel {
 public:
  explicit Sentinel(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    write_text(dir_ / kSentinel, "run in progress or failed\n");
  }
  void done() { fs::remove(dir_ / kSentinel); }

 private:
  fs::path dir_;
};

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " does not exist: " + p.string());
}

std::vector<fs::path> image_files(const fs::path& input) {
  require_exists(input, "input");
  std::vector<fs::path> files;
  if (fs::is_regular_file(input)) {
    files.push_back(input);
  } else {
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw DataError("no images found in " + input.string());
  return files;
}

std::optional<torch::Tensor> load_image(const fs::path& p, std::int64_t resolution) {
  auto rgb = decode_image(p);
  if (!rgb) {
    std::cerr << "warning: skipping undecodable image " << p.string() << '\n';
    return std::nullopt;
  }
  return normalize_image(*rgb, resolution);
}

int synth_data(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto out = output_dir(c, "synth-data");
  Sentinel sentinel(out);
  write_text(out / kSnapshot, to_config_text(cfg));
  SyntheticSpec spec;
  spec.resolution = cfg.data.resolution;
  spec.count = cfg.data.synthetic_count;
  spec.motif = cfg.data.motif;
  spec.seed = cfg.data.seed;
  spec.patch_size = cfg.style.patch_size;
  dump_synthetic(generate_synthetic(spec), out);
  sentinel.done();
  std::cout << "wrote " << spec.count << " images per domain to " << out.string() << '\n';
  return kExitOk;
}

int train(const Common& c, const std::string& resume) {
  const auto cfg = resolve_config(c);
  const auto out = output_dir(c, "train");
  Sentinel sentinel(out);
  write_text(out / kSnapshot, to_config_text(cfg));
  const auto [source, target] = load_domains(cfg);

  Trainer trainer(cfg);
  if (!resume.empty()) {
    require_exists(resume, "checkpoint");
    trainer.restore(load_checkpoint(resume));
  }
  FitOptions opts;
  opts.output_dir = out;
  opts.on_step = [](const LossReport& r) {
    if ((r.step + 1) % 20 == 0)
      std::cout << "step " << r.step + 1 << "  total " << r.total << "  d " << r.d_loss << "  global " << r.global
                << "  local " << r.local << '\n';
  };
  const auto result = fit(trainer, source, target, opts);
  sentinel.done();
  std::cout << "trained to step " << trainer.step() << "; " << result.checkpoints.size() << " checkpoint(s) in "
            << (out / "checkpoints").string() << '\n';
  return kExitOk;
}

int translate(const Common& c, const std::string& ckpt_path, const std::string& input, const std::string& style,
              const std::string& style_image) {
  require_exists(ckpt_path, "checkpoint");
  const auto ckpt = load_checkpoint(ckpt_path);
  auto cfg = ckpt.config;
  for (const auto& o : c.overrides) apply_override(cfg, o);
  const auto out = output_dir(c, "translate");
  Sentinel sentinel(out);
  write_text(out / kSnapshot, to_config_text(cfg));

  StyleSource source;
  if (style == "running_mean") {
    source = StyleSource::RunningMean;
  } else if (style == "from_image") {
    source = StyleSource::FromImage;
  } else {
    throw ConfigError("--style must be running_mean or from_image, got '" + style + "'");
  }
  std::optional<torch::Tensor> style_tensor;
  if (source == StyleSource::FromImage) {
    if (style_image.empty()) throw ConfigError("--style from_image needs --style-image");
    require_exists(style_image, "style image");
    style_tensor = load_image(style_image, cfg.data.resolution);
    if (!style_tensor) throw DataError("cannot decode style image " + style_image);
  }

  Translator translator(ckpt);
  std::size_t written = 0;
  for (const auto& file : image_files(input)) {
    const auto x = load_image(file, cfg.data.resolution);
    if (!x) continue;
    write_png(out / (file.stem().string() + ".png"), translator.translate(*x, source, style_tensor));
    ++written;
  }
  if (written == 0) throw DataError("no decodable images in " + input);
  sentinel.done();
  std::cout << "translated " << written << " image(s) into " << out.string() << '\n';
  return kExitOk;
}

int eval(const Common& c, const std::string& translated_dir, const std::string& target_dir) {
  const auto cfg = resolve_config(c);
  require_exists(translated_dir, "translated folder");
  require_exists(target_dir, "target folder");
  const auto out = output_dir(c, "eval");
  Sentinel sentinel(out);
  write_text(out / kSnapshot, to_config_text(cfg));

  const auto translated = load_folder(translated_dir, cfg.data.resolution, cfg.data.seed, Domain::Target);
  const auto target = load_folder(target_dir, cfg.data.resolution, cfg.data.seed, Domain::Target);
  const auto& m = cfg.metrics;
  const auto extractor = make_feature_extractor(m.extractor, m.extractor_weights, m.seed);
  const auto report = evaluate_run(translated, target, *extractor, m.seed, m.kid_degree, m.dc_k);
  write_text(out / "metrics.json", report.to_json().dump(2) + "\n");
  sentinel.done();
  std::cout << report.to_table();
  return kExitOk;
}

int inspect_attention(const Common& c, const std::string& input) {
  const auto cfg = resolve_config(c);
  const auto out = output_dir(c, "inspect-attention");
  Sentinel sentinel(out);
  write_text(out / kSnapshot, to_config_text(cfg));
  const auto provider = make_attention_provider(cfg.local);
  std::size_t written = 0;
  for (const auto& file : image_files(input)) {
    const auto x = load_image(file, cfg.data.resolution);
    if (!x) continue;
    const auto a = provider->compute(*x).weights;
    write_png(out / (file.stem().string() + "_attention.png"),
              hconcat({*x, attention_to_image(a), attention_overlay(*x, a)}));
    ++written;
  }
  if (written == 0) throw DataError("no decodable images in " + input);
  sentinel.done();
  std::cout << "wrote " << written << " attention overlay(s) using " << provider->id() << " to " << out.string()
            << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"glanet: unpaired image translation with global and local alignment"};
  app.require_subcommand(1);

  Common synth_c, train_c, translate_c, eval_c, attn_c;
  std::string resume, ckpt, input, style = "running_mean", style_image, translated_dir, target_dir, attn_input;

  auto* synth = app.add_subcommand("synth-data", "Write the synthetic two-domain corpus as image folders");
  add_common(synth, synth_c);

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoints, history.jsonl and samples");
  add_common(train_cmd, train_c);
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from");

  auto* translate_cmd = app.add_subcommand("translate", "Translate source images with a checkpoint");
  add_common(translate_cmd, translate_c);
  translate_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  translate_cmd->add_option("--input", input, "Image file or folder")->required();
  translate_cmd->add_option("--style", style, "running_mean or from_image");
  translate_cmd->add_option("--style-image", style_image, "Target-domain image for from_image");

  auto* eval_cmd = app.add_subcommand("eval", "Fréchet distance, KID, density and coverage between two folders");
  add_common(eval_cmd, eval_c);
  eval_cmd->add_option("--translated", translated_dir, "Translated images")->required();
  eval_cmd->add_option("--target", target_dir, "Real target-domain images")->required();

  auto* attn = app.add_subcommand("inspect-attention", "Render attention maps for a folder of images");
  add_common(attn, attn_c);
  attn->add_option("--input", attn_input, "Image file or folder")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*synth) return synth_data(synth_c);
    if (*train_cmd) return train(train_c, resume);
    if (*translate_cmd) return translate(translate_c, ckpt, input, style, style_image);
    if (*eval_cmd) return eval(eval_c, translated_dir, target_dir);
    if (*attn) return inspect_attention(attn_c, attn_input);
  } catch (const ConfigError& e) {
    std::cerr << "glanet: config error: " << e.what() << '\n';
    return kExitUser;
  } catch (const DataError& e) {
    std::cerr << "glanet: data error: " << e.what() << '\n';
    return kExitUser;
  } catch (const NumericError& e) {
    std::cerr << "glanet: numeric error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    if (const auto nl = msg.find('\n'); nl != std::string::npos) msg.resize(nl);
    std::cerr << "glanet: internal error: " << msg << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace gla::cli
