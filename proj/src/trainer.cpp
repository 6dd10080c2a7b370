#include "glanet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include "glanet/errors.hpp"
#include "glanet/global_alignment.hpp"
#include "glanet/image_io.hpp"
#include "glanet/rng.hpp"

namespace gla {

nlohmann::json LossReport::to_json() const {
  return {{"step", step},
          {"epoch", epoch},
          {"d_loss", d_loss},
          {"g_adv", g_adv},
          {"likelihood", likelihood},
          {"regularization", regularization},
          {"global", global},
          {"local", local},
          {"total", total},
          {"lambda_global", lambda_global},
          {"lambda_local", lambda_local},
          {"wall_time", wall_time}};
}

std::map<std::string, torch::Tensor> named_state(const torch::nn::Module& model) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : model.named_parameters()) out.emplace(p.key(), p.value().detach().clone());
  for (const auto& b : model.named_buffers()) out.emplace(b.key(), b.value().detach().clone());
  return out;
}

void load_parameters(torch::nn::Module& model, const std::map<std::string, torch::Tensor>& params) {
  torch::NoGradGuard no_grad;
  std::set<std::string> seen;
  auto copy_into = [&](const std::string& name, torch::Tensor& target) {
    const auto it = params.find(name);
    if (it == params.end()) throw DataError("checkpoint lacks parameter '" + name + "'");
    if (it->second.sizes() != target.sizes())
      throw DataError("checkpoint parameter '" + name + "' has a different shape than the model");
    target.copy_(it->second);
    seen.insert(name);
  };
  for (auto& p : model.named_parameters()) copy_into(p.key(), p.value());
  for (auto& b : model.named_buffers()) copy_into(b.key(), b.value());
  for (const auto& [name, t] : params)
    if (!seen.count(name)) throw DataError("checkpoint parameter '" + name + "' does not exist in the model");
}

namespace {

torch::Tensor as_batch(const torch::Tensor& t) { return t.dim() == 3 ? t.unsqueeze(0) : t; }

void check_finite(double value, const char* term, std::int64_t step) {
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss term '" + std::string(term) + "' at step " + std::to_string(step) +
                       " (value " + std::to_string(value) + ")");
  }
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

std::vector<std::pair<std::string, torch::Tensor>> trainable(torch::nn::Module& m, const std::string& prefix) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (auto& p : m.named_parameters())
    if (p.value().requires_grad()) out.emplace_back(prefix + p.key(), p.value());
  return out;
}

std::vector<torch::Tensor> tensors_of(const std::vector<std::pair<std::string, torch::Tensor>>& named) {
  std::vector<torch::Tensor> out;
  for (const auto& [n, t] : named) out.push_back(t);
  return out;
}

void save_adam(const torch::optim::Adam& opt, const std::vector<std::pair<std::string, torch::Tensor>>& params,
               const std::string& group, std::map<std::string, torch::Tensor>& out) {
  const auto& state = opt.state();
  for (const auto& [name, p] : params) {
    const auto it = state.find(p.unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    const auto key = group + "." + name;
    out.emplace(key + ".exp_avg", s.exp_avg().detach().clone());
    out.emplace(key + ".exp_avg_sq", s.exp_avg_sq().detach().clone());
    out.emplace(key + ".step", torch::tensor(s.step(), torch::kInt64));
  }
}

void restore_adam(torch::optim::Adam& opt, const std::vector<std::pair<std::string, torch::Tensor>>& params,
                  const std::string& group, const std::map<std::string, torch::Tensor>& in) {
  auto& state = opt.state();
  for (const auto& [name, p] : params) {
    const auto key = group + "." + name;
    const auto avg = in.find(key + ".exp_avg");
    if (avg == in.end()) {
      state.erase(p.unsafeGetTensorImpl());
      continue;
    }
    const auto sq = in.find(key + ".exp_avg_sq");
    const auto step = in.find(key + ".step");
    if (sq == in.end() || step == in.end()) throw DataError("checkpoint has incomplete optimizer state for " + key);
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(step->second.item<std::int64_t>());
    s->exp_avg(avg->second.clone().to(p.options()));
    s->exp_avg_sq(sq->second.clone().to(p.options()));
    state[p.unsafeGetTensorImpl()] = std::move(s);
  }
}

}  // namespace

Trainer::Trainer(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  model_ = GlaNet(cfg_);
  g_params_ = trainable(*model_->style_encoder, "style_encoder.");
  const auto gen = trainable(*model_->generator, "generator.");
  g_params_.insert(g_params_.end(), gen.begin(), gen.end());
  d_params_ = trainable(*model_->discriminator, "discriminator.");

  const auto& t = cfg_.trainer;
  auto adam = torch::optim::AdamOptions(t.lr).betas({t.beta1, t.beta2});
  opt_g_ = std::make_unique<torch::optim::Adam>(tensors_of(g_params_), adam);
  opt_d_ = std::make_unique<torch::optim::Adam>(tensors_of(d_params_), adam);
  provider_ = make_attention_provider(cfg_.local);
  extractor_ = make_feature_extractor(cfg_.local.extractor, cfg_.local.extractor_weights, cfg_.local.extractor_seed);
}

AttentionMap Trainer::attention_for(const torch::Tensor& image) const {
  if (!cfg_.trainer.use_local) {
    // Without the local-alignment addition every pixel counts equally.
    return {torch::ones({image.size(-2), image.size(-1)}, image.options())};
  }
  return provider_->compute(image);
}

ForwardPass Trainer::forward(const torch::Tensor& x, const torch::Tensor& y) {
  const auto xb = as_batch(x), yb = as_batch(y);
  ForwardPass pass;
  pass.source_code = model_->style_encoder->forward(xb, Domain::Source);
  pass.target_code = model_->style_encoder->forward(yb, Domain::Target);
  pass.translated = model_->generator->translate(xb, pass.target_code);
  return pass;
}

double Trainer::discriminator_phase(const torch::Tensor& y, const torch::Tensor& translated) {
  auto& d = model_->discriminator;
  set_requires_grad(*d, true);
  opt_d_->zero_grad();
  const auto loss = d_loss(d->forward(as_batch(y)), d->forward(translated.detach()));
  const double value = loss.item<double>();
  check_finite(value, "d_loss", step_);
  loss.backward();
  opt_d_->step();
  return value;
}

LossReport Trainer::generator_phase(const torch::Tensor& x, const ForwardPass& pass) {
  const auto& t = cfg_.trainer;
  const auto xb = as_batch(x);
  const auto step_seed = derive_seed(t.seed, {static_cast<std::uint64_t>(step_)});
  LossReport report;
  report.step = step_;
  report.lambda_global = t.lambda_global;
  report.lambda_local = t.lambda_local;

  auto& d = model_->discriminator;
  set_requires_grad(*d, false);
  opt_g_->zero_grad();

  const auto adv = g_loss(d->forward(pass.translated), cfg_.gan.generator_mode);
  report.g_adv = adv.item<double>();
  check_finite(report.g_adv, "g_adv", step_);
  auto total = adv;

  if (t.use_global && t.lambda_global > 0) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(step_seed, {stream::kStyleNoise}));
    const auto noise = torch::randn(pass.target_code.mu.sizes(), gen, pass.target_code.mu.options());
    const auto terms = global_loss_terms({pass.source_code, pass.target_code}, noise, cfg_.global.lambda_l,
                                         cfg_.global.lambda_r, cfg_.global.likelihood_mode,
                                         cfg_.global.regularization_mode);
    report.likelihood = terms.likelihood.item<double>();
    report.regularization = terms.regularization.item<double>();
    report.global = terms.total.item<double>();
    check_finite(report.likelihood, "likelihood", step_);
    check_finite(report.regularization, "regularization", step_);
    total = total + t.lambda_global * terms.total;
  }

  if (t.lambda_local > 0) {
    const auto opts = LocalLossOptions::from(cfg_.local);
    torch::Tensor local;
    for (std::int64_t b = 0; b < xb.size(0); ++b) {
      const auto attention = attention_for(xb[b]);
      std::optional<AttentionMap> attention_yhat;
      if (cfg_.local.recompute_attention && t.use_local) attention_yhat = attention_for(pass.translated[b]);
      const auto term = local_loss(xb[b], pass.translated[b], attention, *extractor_, opts,
                                   derive_seed(step_seed, {stream::kQueries, static_cast<std::uint64_t>(b)}),
                                   attention_yhat)
                            .loss;
      local = local.defined() ? local + term : term;
    }
    local = local / static_cast<double>(xb.size(0));
    report.local = local.item<double>();
    check_finite(report.local, "local", step_);
    total = total + t.lambda_local * local;
  }

  report.total = total.item<double>();
  check_finite(report.total, "total", step_);
  total.backward();
  opt_g_->step();
  set_requires_grad(*d, true);
  return report;
}

void Trainer::update_running_style(const StyleCode& code) {
  torch::NoGradGuard no_grad;
  const auto mu = code.mu.detach().mean(0, /*keepdim=*/true);
  const auto sigma = code.sigma.detach().mean(0, true);
  if (!running_style_) {
    running_style_ = StyleCode{mu.clone(), sigma.clone()};
    return;
  }
  const double m = cfg_.trainer.style_momentum;
  running_style_->mu = m * running_style_->mu + (1 - m) * mu;
  running_style_->sigma = m * running_style_->sigma + (1 - m) * sigma;
}

LossReport Trainer::train_step(const torch::Tensor& x, const torch::Tensor& y) {
  const auto pass = forward(x, y);
  const double d_value = discriminator_phase(y, pass.translated);
  auto report = generator_phase(x, pass);
  report.d_loss = d_value;
  update_running_style(pass.target_code);
  ++step_;
  return report;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = cfg_;
  ckpt.step = step_;
  ckpt.parameters = named_state(*model_);
  save_adam(*opt_g_, g_params_, "generator", ckpt.optimizer);
  save_adam(*opt_d_, d_params_, "discriminator", ckpt.optimizer);
  if (running_style_) ckpt.running_style = StyleCode{running_style_->mu.clone(), running_style_->sigma.clone()};
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  load_parameters(*model_, ckpt.parameters);
  restore_adam(*opt_g_, g_params_, "generator", ckpt.optimizer);
  restore_adam(*opt_d_, d_params_, "discriminator", ckpt.optimizer);
  step_ = ckpt.step;
  running_style_.reset();
  if (ckpt.running_style) running_style_ = StyleCode{ckpt.running_style->mu.clone(), ckpt.running_style->sigma.clone()};
}

std::int64_t steps_per_epoch(const DomainDataset& source, std::int64_t batch) {
  return (static_cast<std::int64_t>(source.size()) + batch - 1) / batch;
}

namespace {

std::string numbered(const char* prefix, std::int64_t n, int width, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*lld%s", prefix, width, static_cast<long long>(n), ext);
  return buf;
}

void write_sample_grid(Trainer& trainer, const torch::Tensor& x, const std::filesystem::path& path) {
  torch::NoGradGuard no_grad;
  auto& model = trainer.model();
  const auto image = x.dim() == 4 ? x[0] : x;
  const auto code = trainer.running_style();
  if (!code) return;
  const auto out = model->generator->translate(image.unsqueeze(0), *code)[0];
  const auto attention = trainer.attention_for(image).weights;
  write_png(path, hconcat({image, attention_to_image(attention), out}));
}

}  // namespace

FitResult fit(Trainer& trainer, const DomainDataset& source, const DomainDataset& target, const FitOptions& opts) {
  const auto& t = trainer.config().trainer;
  const auto per_epoch = steps_per_epoch(source, t.batch);
  auto total = t.epochs * per_epoch;
  if (t.max_steps > 0) total = t.max_steps;

  const bool persist = !opts.output_dir.empty();
  std::ofstream history;
  if (persist) {
    std::filesystem::create_directories(opts.output_dir / "checkpoints");
    std::filesystem::create_directories(opts.output_dir / "samples");
    history.open(opts.output_dir / "history.jsonl", std::ios::app);
  }

  FitResult result;
  const auto start = std::chrono::steady_clock::now();
  std::int64_t cached_epoch = -1;
  std::vector<UnpairedStep> schedule;
  bool ended_on_epoch = false;
  while (trainer.step() < total) {
    const auto s = trainer.step();
    const auto epoch = s / per_epoch;
    const auto pos = s % per_epoch;
    if (epoch != cached_epoch) {
      schedule = unpaired_schedule(source, target, epoch);
      cached_epoch = epoch;
    }
    std::vector<torch::Tensor> xs, ys;
    const auto first = static_cast<std::size_t>(pos * t.batch);
    for (auto i = first; i < std::min(schedule.size(), first + static_cast<std::size_t>(t.batch)); ++i) {
      xs.push_back(source[schedule[i].source_index].pixels);
      ys.push_back(target[schedule[i].target_index].pixels);
    }
    const auto x = torch::stack(xs), y = torch::stack(ys);

    auto report = trainer.train_step(x, y);
    report.epoch = epoch;
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(report);
    if (opts.on_step) opts.on_step(report);

    ended_on_epoch = pos == per_epoch - 1;
    if (persist) {
      history << report.to_json().dump() << '\n';
      history.flush();
      if (t.sample_every > 0 && (s + 1) % t.sample_every == 0)
        write_sample_grid(trainer, x, opts.output_dir / "samples" / numbered("step_", s + 1, 6, ".png"));
      if (ended_on_epoch && t.checkpoint_every_epoch) {
        const auto path = opts.output_dir / "checkpoints" / numbered("epoch_", epoch + 1, 4, ".ckpt");
        save_checkpoint(path, trainer.checkpoint());
        result.checkpoints.push_back(path);
        write_sample_grid(trainer, x, opts.output_dir / "samples" / numbered("epoch_", epoch + 1, 4, ".png"));
      }
    }
  }
  result.final_state = trainer.checkpoint();
  if (persist && (!ended_on_epoch || !t.checkpoint_every_epoch) && !result.history.empty()) {
    const auto path = opts.output_dir / "checkpoints" / numbered("step_", trainer.step(), 6, ".ckpt");
    save_checkpoint(path, result.final_state);
    result.checkpoints.push_back(path);
  }
  return result;
}

FitResult fit(const DomainDataset& source, const DomainDataset& target, const RunConfig& cfg,
              const FitOptions& opts) {
  Trainer trainer(cfg);
  return fit(trainer, source, target, opts);
}

Translator::Translator(const Checkpoint& ckpt) {
  model_ = GlaNet(ckpt.config);
  load_parameters(*model_, ckpt.parameters);
  model_->eval();
  running_style_ = ckpt.running_style;
}

StyleCode Translator::code_for(StyleSource style, const std::optional<torch::Tensor>& style_image) {
  torch::NoGradGuard no_grad;
  if (style == StyleSource::RunningMean) {
    if (!running_style_) throw ConfigError("running-mean style requested but the checkpoint never recorded one");
    return *running_style_;
  }
  if (!style_image) throw ConfigError("from_image style requires a style image");
  return model_->style_encoder->forward(as_batch(*style_image), Domain::Target);
}

torch::Tensor Translator::translate(const torch::Tensor& x, StyleSource style,
                                    const std::optional<torch::Tensor>& style_image) {
  torch::NoGradGuard no_grad;
  const auto code = code_for(style, style_image);
  auto out = model_->generator->translate(as_batch(x), code);
  return x.dim() == 3 ? out.squeeze(0) : out;
}

torch::Tensor infer(const torch::Tensor& x, const Checkpoint& ckpt, StyleSource style,
                    const std::optional<torch::Tensor>& style_image) {
  Translator translator(ckpt);
  return translator.translate(x, style, style_image);
}

}  // namespace gla
