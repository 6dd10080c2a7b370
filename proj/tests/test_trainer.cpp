#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "glanet/checkpoint.hpp"
#include "glanet/data.hpp"
#include "glanet/errors.hpp"
#include "glanet/trainer.hpp"
#include "test_util.hpp"

using namespace gla;
using gla::test::TempDir;
using gla::test::tiny_config;

namespace {

void expect_same_tensors(const std::map<std::string, torch::Tensor>& a, const std::map<std::string, torch::Tensor>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, t] : a) {
    ASSERT_TRUE(b.count(name)) << name;
    EXPECT_TRUE(torch::equal(t, b.at(name))) << name;
  }
}

void expect_same_losses(const LossReport& a, const LossReport& b) {
  EXPECT_EQ(a.step, b.step);
  EXPECT_EQ(a.d_loss, b.d_loss);
  EXPECT_EQ(a.g_adv, b.g_adv);
  EXPECT_EQ(a.likelihood, b.likelihood);
  EXPECT_EQ(a.regularization, b.regularization);
  EXPECT_EQ(a.local, b.local);
  EXPECT_EQ(a.total, b.total);
}

std::map<std::string, torch::Tensor> prefixed(const torch::nn::Module& m, const std::string& prefix) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& [name, t] : named_state(m))
    if (name.rfind(prefix, 0) == 0) out[name] = t;
  return out;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(Trainer, StepsPerEpochRoundsUp) {
  const auto [source, target] = load_domains(tiny_config());
  EXPECT_EQ(steps_per_epoch(source, 1), 4);
  EXPECT_EQ(steps_per_epoch(source, 3), 2);
  EXPECT_EQ(steps_per_epoch(source, 4), 1);
}

TEST(Trainer, CheckpointRoundTripIsBitExact) {
  const auto cfg = tiny_config();
  const auto [source, target] = load_domains(cfg);
  Trainer trainer(cfg);
  for (int i = 0; i < 3; ++i) trainer.train_step(source[i].pixels, target[i].pixels);
  TempDir dir;
  const auto ckpt = trainer.checkpoint();
  save_checkpoint(dir / "a.ckpt", ckpt);
  const auto back = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(back.step, 3);
  EXPECT_EQ(to_config_text(back.config), to_config_text(cfg));
  expect_same_tensors(ckpt.parameters, back.parameters);
  expect_same_tensors(ckpt.optimizer, back.optimizer);
  EXPECT_FALSE(ckpt.optimizer.empty());
  ASSERT_TRUE(back.running_style.has_value());
  EXPECT_TRUE(torch::equal(back.running_style->mu, ckpt.running_style->mu));
  EXPECT_TRUE(torch::equal(back.running_style->sigma, ckpt.running_style->sigma));

  Trainer other(cfg);
  other.restore(back);
  expect_same_tensors(named_state(*other.model()), ckpt.parameters);
  save_checkpoint(dir / "b.ckpt", other.checkpoint());
  std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), {}), bb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(ba, bb);
}

TEST(Trainer, ResumeReproducesTheUninterruptedTrajectory) {
  auto cfg = tiny_config();
  const auto [source, target] = load_domains(cfg);
  const auto full = fit(source, target, cfg);
  ASSERT_EQ(full.history.size(), 8u);

  auto first_cfg = cfg;
  first_cfg.trainer.max_steps = 3;
  const auto first = fit(source, target, first_cfg);
  ASSERT_EQ(first.history.size(), 3u);
  TempDir dir;
  save_checkpoint(dir / "mid.ckpt", first.final_state);

  Trainer resumed(cfg);
  resumed.restore(load_checkpoint(dir / "mid.ckpt"));
  const auto rest = fit(resumed, source, target);
  ASSERT_EQ(rest.history.size(), 5u);
  for (std::size_t i = 0; i < 3; ++i) expect_same_losses(first.history[i], full.history[i]);
  for (std::size_t i = 0; i < 5; ++i) expect_same_losses(rest.history[i], full.history[i + 3]);
  expect_same_tensors(rest.final_state.parameters, full.final_state.parameters);
  expect_same_tensors(rest.final_state.optimizer, full.final_state.optimizer);
}

TEST(Trainer, IdenticalSeedsGiveIdenticalTraces) {
  auto cfg = tiny_config();
  cfg.trainer.max_steps = 50;
  const auto [source, target] = load_domains(cfg);
  const auto a = fit(source, target, cfg), b = fit(source, target, cfg);
  ASSERT_EQ(a.history.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) expect_same_losses(a.history[i], b.history[i]);
  for (const auto& r : a.history) EXPECT_TRUE(std::isfinite(r.total));

  cfg.trainer.seed = 1;
  cfg.trainer.max_steps = 2;
  const auto c = fit(source, target, cfg);
  EXPECT_NE(c.history[0].total, a.history[0].total);
}

TEST(Trainer, PhasesOnlyTouchTheirOwnNetworks) {
  const auto cfg = tiny_config();
  const auto [source, target] = load_domains(cfg);
  Trainer trainer(cfg);
  const auto x = source[0].pixels, y = target[0].pixels;
  const auto pass = trainer.forward(x, y);
  const auto g_before = prefixed(*trainer.model(), "generator.");
  const auto s_before = prefixed(*trainer.model(), "style_encoder.");
  const auto d_before = prefixed(*trainer.model(), "discriminator.");
  trainer.discriminator_phase(y, pass.translated);
  expect_same_tensors(prefixed(*trainer.model(), "generator."), g_before);
  expect_same_tensors(prefixed(*trainer.model(), "style_encoder."), s_before);
  const auto d_after = prefixed(*trainer.model(), "discriminator.");
  EXPECT_FALSE(torch::equal(d_after.begin()->second, d_before.begin()->second));

  trainer.generator_phase(x, pass);
  expect_same_tensors(prefixed(*trainer.model(), "discriminator."), d_after);
  EXPECT_FALSE(torch::equal(prefixed(*trainer.model(), "generator.").begin()->second, g_before.begin()->second));
  EXPECT_FALSE(
      torch::equal(prefixed(*trainer.model(), "style_encoder.").begin()->second, s_before.begin()->second));
}

TEST(Trainer, ZeroWeightsLeaveOnlyTheAdversarialTerm) {
  auto cfg = tiny_config();
  cfg.trainer.lambda_global = 0;
  cfg.trainer.lambda_local = 0;
  const auto [source, target] = load_domains(cfg);
  Trainer trainer(cfg);
  const auto r = trainer.train_step(source[0].pixels, target[0].pixels);
  EXPECT_EQ(r.total, r.g_adv);
  EXPECT_EQ(r.global, 0.0);
  EXPECT_EQ(r.local, 0.0);
  EXPECT_EQ(r.likelihood, 0.0);
}

TEST(Trainer, TotalCombinesTheWeightedTerms) {
  const auto cfg = tiny_config();
  const auto [source, target] = load_domains(cfg);
  Trainer trainer(cfg);
  const auto r = trainer.train_step(source[0].pixels, target[0].pixels);
  EXPECT_EQ(r.lambda_global, 1.0);
  EXPECT_EQ(r.lambda_local, 10.0);
  EXPECT_NEAR(r.total, r.g_adv + r.lambda_global * r.global + r.lambda_local * r.local, 1e-5 * std::abs(r.total));
  EXPECT_NEAR(r.global, r.likelihood + r.regularization, 1e-5 * (1 + std::abs(r.global)));
  EXPECT_GT(r.local, 0.0);
  const auto json = r.to_json();
  for (const char* key : {"step", "d_loss", "g_adv", "global", "local", "total", "lambda_global", "lambda_local"})
    EXPECT_TRUE(json.contains(key)) << key;
}

TEST(Trainer, AllAblationCombinationsTrain) {
  const auto base = tiny_config();
  const auto [source, target] = load_domains(base);
  for (const bool adain : {false, true})
    for (const bool global : {false, true})
      for (const bool local : {false, true}) {
        auto cfg = base;
        cfg.trainer.use_adain_new = adain;
        cfg.trainer.use_global = global;
        cfg.trainer.use_local = local;
        cfg.trainer.max_steps = 2;
        const auto r = fit(source, target, cfg);
        ASSERT_EQ(r.history.size(), 2u);
        for (const auto& h : r.history) {
          EXPECT_TRUE(std::isfinite(h.total));
          if (!global) EXPECT_EQ(h.global, 0.0);
        }
      }
}

TEST(Trainer, LocalAblationUsesUniformAttention) {
  auto cfg = tiny_config();
  cfg.trainer.use_local = false;
  Trainer trainer(cfg);
  const auto img = torch::rand({3, 32, 32}) * 2 - 1;
  EXPECT_TRUE(torch::equal(trainer.attention_for(img).weights, torch::ones({32, 32})));
  Trainer with_local(tiny_config());
  EXPECT_TRUE(torch::equal(with_local.attention_for(img).weights, SaliencyAttention().compute(img).weights));
}

TEST(Trainer, NonFiniteLossIsReported) {
  const auto cfg = tiny_config();
  const auto [source, target] = load_domains(cfg);
  Trainer trainer(cfg);
  {
    torch::NoGradGuard g;
    trainer.model()->discriminator->parameters()[0].fill_(std::nan(""));
  }
  try {
    trainer.train_step(source[0].pixels, target[0].pixels);
    FAIL() << "expected a NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("d_loss"), std::string::npos);
  }
}

TEST(Trainer, RunningStyleFollowsTheMomentum) {
  auto cfg = tiny_config();
  cfg.trainer.style_momentum = 0.5;
  const auto [source, target] = load_domains(cfg);
  Trainer trainer(cfg);
  EXPECT_FALSE(trainer.running_style().has_value());
  const auto code0 = trainer.forward(source[0].pixels, target[0].pixels).target_code;
  trainer.train_step(source[0].pixels, target[0].pixels);
  ASSERT_TRUE(trainer.running_style().has_value());
  EXPECT_EQ(trainer.running_style()->mu.sizes(), (std::vector<std::int64_t>{1, 8}));
  EXPECT_TRUE(torch::allclose(trainer.running_style()->mu, code0.mu.detach()));
  const auto prev = trainer.running_style()->mu.clone();
  const auto code1 = trainer.forward(source[1].pixels, target[1].pixels).target_code;
  trainer.train_step(source[1].pixels, target[1].pixels);
  EXPECT_TRUE(torch::allclose(trainer.running_style()->mu, 0.5 * prev + 0.5 * code1.mu.detach()));
}

TEST(Fit, WritesCheckpointsHistoryAndSamples) {
  auto cfg = tiny_config();
  cfg.trainer.epochs = 1;
  cfg.trainer.sample_every = 2;
  const auto [source, target] = load_domains(cfg);
  TempDir dir;
  const auto r = fit(source, target, cfg, {dir.path(), {}});
  ASSERT_EQ(r.checkpoints.size(), 1u);
  EXPECT_EQ(r.checkpoints[0].filename(), "epoch_0001.ckpt");
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints/epoch_0001.ckpt"));
  EXPECT_EQ(count_lines(dir / "history.jsonl"), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "samples/step_000002.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "samples/step_000004.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "samples/epoch_0001.png"));

  auto partial = cfg;
  partial.trainer.max_steps = 3;
  TempDir dir2;
  const auto p = fit(source, target, partial, {dir2.path(), {}});
  ASSERT_EQ(p.checkpoints.size(), 1u);
  EXPECT_EQ(p.checkpoints[0].filename(), "step_000003.ckpt");
}

TEST(Translator, DeterministicBoundedAndStyleSources) {
  const auto cfg = tiny_config();
  const auto [source, target] = load_domains(cfg);
  const auto trained = fit(source, target, cfg).final_state;
  const auto x = source[0].pixels;
  const auto a = infer(x, trained, StyleSource::RunningMean);
  const auto b = infer(x, trained, StyleSource::RunningMean);
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_EQ(a.sizes(), x.sizes());
  EXPECT_GE(a.min().item<float>(), -1.0f);
  EXPECT_LE(a.max().item<float>(), 1.0f);

  const auto from_image = infer(x, trained, StyleSource::FromImage, target[1].pixels);
  EXPECT_EQ(from_image.sizes(), x.sizes());
  EXPECT_THROW(infer(x, trained, StyleSource::FromImage), ConfigError);

  Trainer fresh(cfg);
  EXPECT_THROW(infer(x, fresh.checkpoint(), StyleSource::RunningMean), ConfigError);

  const auto batch = Translator(trained).translate(source.stacked(), StyleSource::RunningMean);
  EXPECT_EQ(batch.size(0), 4);
  EXPECT_TRUE(torch::allclose(batch[0], a, 1e-5, 1e-6));
}

TEST(LoadParameters, RejectsMissingExtraAndMisshapenEntries) {
  const auto cfg = tiny_config();
  Trainer trainer(cfg);
  auto params = named_state(*trainer.model());
  load_parameters(*trainer.model(), params);

  auto missing = params;
  missing.erase(missing.begin());
  EXPECT_THROW(load_parameters(*trainer.model(), missing), DataError);
  auto extra = params;
  extra["generator.bogus"] = torch::zeros({1});
  EXPECT_THROW(load_parameters(*trainer.model(), extra), DataError);
  auto bad = params;
  bad.begin()->second = torch::zeros({7, 7});
  EXPECT_THROW(load_parameters(*trainer.model(), bad), DataError);
}
