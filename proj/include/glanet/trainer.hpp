#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/optim/adam.h>

#include "glanet/attention.hpp"
#include "glanet/checkpoint.hpp"
#include "glanet/config.hpp"
#include "glanet/data.hpp"
#include "glanet/features.hpp"
#include "glanet/local_alignment.hpp"
#include "glanet/model.hpp"

namespace gla {

// One training step's loss components. `total` is the generator-side objective
// g_adv + lambda_global * global + lambda_local * local; terms with zero weight
// (or disabled by an ablation flag) are not evaluated and reported as 0.
struct LossReport {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double d_loss = 0;
  double g_adv = 0;
  double likelihood = 0;
  double regularization = 0;
  double global = 0;
  double local = 0;
  double total = 0;
  double lambda_global = 0;
  double lambda_local = 0;
  double wall_time = 0;

  nlohmann::json to_json() const;
};

// Intermediate tensors of a step, shared by the two update phases.
struct ForwardPass {
  StyleCode source_code;
  StyleCode target_code;
  torch::Tensor translated;
};

class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  // One step on batches x (source) and y (target), [B,3,H,W] or [3,H,W]:
  // discriminator update on the detached translation, then one Adam step over
  // generator + style encoder.
  LossReport train_step(const torch::Tensor& x, const torch::Tensor& y);

  // The pieces of train_step, exposed for inspection.
  ForwardPass forward(const torch::Tensor& x, const torch::Tensor& y);
  double discriminator_phase(const torch::Tensor& y, const torch::Tensor& translated);
  LossReport generator_phase(const torch::Tensor& x, const ForwardPass& pass);

  // Attention used by the local term for one source image [3,H,W].
  AttentionMap attention_for(const torch::Tensor& image) const;

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

  const RunConfig& config() const { return cfg_; }
  std::int64_t step() const { return step_; }
  GlaNet& model() { return model_; }
  const std::optional<StyleCode>& running_style() const { return running_style_; }

 private:
  void update_running_style(const StyleCode& code);

  RunConfig cfg_;
  GlaNet model_{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g_;
  std::unique_ptr<torch::optim::Adam> opt_d_;
  std::vector<std::pair<std::string, torch::Tensor>> g_params_;
  std::vector<std::pair<std::string, torch::Tensor>> d_params_;
  std::unique_ptr<AttentionProvider> provider_;
  std::unique_ptr<FeatureExtractor> extractor_;
  std::optional<StyleCode> running_style_;
  std::int64_t step_ = 0;
};

struct FitOptions {
  // Empty: nothing is written to disk.
  std::filesystem::path output_dir;
  std::function<void(const LossReport&)> on_step;
};

struct FitResult {
  std::vector<LossReport> history;
  std::vector<std::filesystem::path> checkpoints;
  Checkpoint final_state;
};

std::int64_t steps_per_epoch(const DomainDataset& source, std::int64_t batch);

// Trains until cfg.trainer.epochs (or exactly max_steps when set) is reached, continuing from
// the trainer's current step. Writes per-epoch checkpoints, sample grids and
// history.jsonl under output_dir when set.
FitResult fit(Trainer& trainer, const DomainDataset& source, const DomainDataset& target,
              const FitOptions& opts = {});
FitResult fit(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
              const FitOptions& opts = {});

enum class StyleSource { RunningMean, FromImage };

// Deterministic source -> target translation from a checkpoint.
class Translator {
 public:
  explicit Translator(const Checkpoint& ckpt);

  // x: [3,H,W] or [B,3,H,W]; style_image required for FromImage.
  torch::Tensor translate(const torch::Tensor& x, StyleSource style,
                          const std::optional<torch::Tensor>& style_image = std::nullopt);

  StyleCode code_for(StyleSource style, const std::optional<torch::Tensor>& style_image);
  GlaNet& model() { return model_; }

 private:
  GlaNet model_{nullptr};
  std::optional<StyleCode> running_style_;
};

torch::Tensor infer(const torch::Tensor& x, const Checkpoint& ckpt, StyleSource style,
                    const std::optional<torch::Tensor>& style_image = std::nullopt);

// Copies named tensors into the model; throws DataError on missing or mis-shaped entries.
void load_parameters(torch::nn::Module& model, const std::map<std::string, torch::Tensor>& params);
std::map<std::string, torch::Tensor> named_state(const torch::nn::Module& model);

}  // namespace gla
