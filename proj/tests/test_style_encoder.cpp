#include <cmath>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "glanet/errors.hpp"
#include "glanet/style_encoder.hpp"
#include "test_util.hpp"

using namespace gla;
using gla::test::check_gradient;
using gla::test::f64;

namespace {

StyleEncoderOptions small_options() {
  StyleEncoderOptions o;
  o.image_size = 8;
  o.patch_size = 4;
  o.embed_dim = 6;
  o.token_hidden = 5;
  o.channel_hidden = 7;
  o.depth = 2;
  o.code_dim = 3;
  return o;
}

double gelu(double x) { return 0.5 * x * (1 + std::erf(x / std::sqrt(2.0))); }
double softplus(double x) { return std::log1p(std::exp(x)); }

void zero_residual_branches(StyleEncoder& enc) {
  torch::NoGradGuard g;
  for (auto& layer : enc->shared->layers) {
    layer->token_fc2->weight.zero_();
    layer->token_fc2->bias.zero_();
    layer->channel_fc2->weight.zero_();
    layer->channel_fc2->bias.zero_();
  }
}

}  // namespace

TEST(PatchEmbedding, SixtyFourPixelsEightPatchGivesSixtyFivePlusClass) {
  PatchEmbedding embed(64, 3, 8, 16);
  EXPECT_EQ(embed->num_patches(), 64);
  const auto tokens = embed->forward(torch::randn({2, 3, 64, 64}));
  EXPECT_EQ(tokens.sizes(), (std::vector<std::int64_t>{2, 65, 16}));
}

TEST(PatchEmbedding, ZeroInputsYieldPositionEmbedding) {
  PatchEmbedding embed(16, 3, 4, 8);
  {
    torch::NoGradGuard g;
    embed->projection->weight.zero_();
    embed->projection->bias.zero_();
    embed->class_token.zero_();
  }
  const auto tokens = embed->forward(torch::zeros({1, 3, 16, 16}));
  EXPECT_TRUE(torch::equal(tokens[0], embed->position));
}

TEST(PatchEmbedding, FirstPatchMatchesHandProjection) {
  torch::manual_seed(11);
  PatchEmbedding embed(12, 3, 4, 5);
  embed->to(torch::kFloat64);
  const auto img = torch::randn({1, 3, 12, 12}, f64());
  const auto tokens = embed->forward(img);
  const auto W = embed->projection->weight, b = embed->projection->bias;
  // Patch (0,0) flattened as (channel, row, col).
  std::vector<double> v;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 4; ++r)
      for (int q = 0; q < 4; ++q) v.push_back(img[0][c][r][q].item<double>());
  for (int d = 0; d < 5; ++d) {
    double acc = b[d].item<double>() + embed->position[1][d].item<double>();
    for (std::size_t k = 0; k < v.size(); ++k) acc += W[d][static_cast<std::int64_t>(k)].item<double>() * v[k];
    EXPECT_NEAR(tokens[0][1][d].item<double>(), acc, 1e-12);
  }
  // Patch (0,1) is the next token in row-major grid order.
  const auto second = embed->flatten_patches(img)[0][1];
  EXPECT_EQ(second[0].item<double>(), img[0][0][0][4].item<double>());
}

TEST(MixerLayer, ZeroSecondWeightsAreIdentity) {
  torch::manual_seed(12);
  MixerLayer layer(5, 4, 6, 7);
  {
    torch::NoGradGuard g;
    layer->token_fc2->weight.zero_();
    layer->token_fc2->bias.zero_();
    layer->channel_fc2->weight.zero_();
    layer->channel_fc2->bias.zero_();
  }
  const auto z = torch::randn({2, 5, 4});
  EXPECT_TRUE(torch::equal(layer->forward(z), z));
}

TEST(MixerLayer, SingleTokenHandEvaluation) {
  MixerLayer layer(1, 2, 1, 1);
  layer->to(torch::kFloat64);
  const double w1 = 0.7, b1 = -0.2, w2 = 1.3, b2 = 0.1;
  const double w3a = 0.4, w3b = -0.9, b3 = 0.05, w4a = 0.6, w4b = -1.1, b4a = 0.2, b4b = -0.3;
  {
    torch::NoGradGuard g;
    layer->token_fc1->weight.fill_(w1);
    layer->token_fc1->bias.fill_(b1);
    layer->token_fc2->weight.fill_(w2);
    layer->token_fc2->bias.fill_(b2);
    layer->channel_fc1->weight.copy_(torch::tensor({{w3a, w3b}}, f64()));
    layer->channel_fc1->bias.fill_(b3);
    layer->channel_fc2->weight.copy_(torch::tensor({{w4a}, {w4b}}, f64()));
    layer->channel_fc2->bias.copy_(torch::tensor({b4a, b4b}, f64()));
  }
  const double a = 1.5, b = -0.5;
  auto layer_norm = [](double x, double y) {
    const double m = (x + y) / 2, var = ((x - m) * (x - m) + (y - m) * (y - m)) / 2;
    const double s = std::sqrt(var + 1e-5);
    return std::pair{(x - m) / s, (y - m) / s};
  };
  const auto [la, lb] = layer_norm(a, b);
  const double z1a = a + w2 * gelu(w1 * la + b1) + b2;
  const double z1b = b + w2 * gelu(w1 * lb + b1) + b2;
  const auto [ma, mb] = layer_norm(z1a, z1b);
  const double u = gelu(w3a * ma + w3b * mb + b3);
  const double outa = z1a + w4a * u + b4a, outb = z1b + w4b * u + b4b;

  const auto out = layer->forward(torch::tensor({{{a, b}}}, f64()));
  EXPECT_NEAR(out[0][0][0].item<double>(), outa, 1e-12);
  EXPECT_NEAR(out[0][0][1].item<double>(), outb, 1e-12);
}

TEST(MixerLayer, GradientWrtTokenWeightsMatchesFiniteDifferences) {
  torch::manual_seed(13);
  MixerLayer layer(4, 3, 5, 6);
  layer->to(torch::kFloat64);
  const auto z = torch::randn({2, 4, 3}, f64());
  auto f = [&] { return layer->forward(z).sum(); };
  for (auto p : {layer->token_fc1->weight, layer->channel_fc1->weight}) {
    const auto r = check_gradient(f, p);
    EXPECT_LT(r.rel_error, 1e-3);
    EXPECT_GT(r.grad_norm, 0);
  }
}

TEST(StyleEncoder, ZeroHeadWeightsForceTheBias) {
  torch::manual_seed(14);
  auto opts = small_options();
  StyleEncoder enc(opts);
  enc->to(torch::kFloat64);
  const std::vector<double> b_mu{0.3, -1.0, 2.0}, b_raw{-3.0, 0.0, 1.5};
  {
    torch::NoGradGuard g;
    enc->head_target->weight.zero_();
    enc->head_target->bias.copy_(torch::tensor({0.3, -1.0, 2.0, -3.0, 0.0, 1.5}, f64()));
  }
  for (int trial = 0; trial < 5; ++trial) {
    const auto code = enc->forward(torch::randn({2, 3, 8, 8}, f64()), Domain::Target);
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(code.mu[b][i].item<double>(), b_mu[i], 1e-12);
        EXPECT_NEAR(code.sigma[b][i].item<double>(), softplus(b_raw[i]) + kSigmaFloor, 1e-12);
      }
    }
  }
}

TEST(StyleEncoder, DefaultConfigurationGivesThirtyTwoDimCodes) {
  StyleEncoder enc(StyleEncoderOptions::from(RunConfig{}));
  const auto code = enc->forward(torch::rand({1, 3, 64, 64}) * 2 - 1, Domain::Source);
  EXPECT_EQ(code.mu.sizes(), (std::vector<std::int64_t>{1, 32}));
  EXPECT_EQ(code.sigma.sizes(), (std::vector<std::int64_t>{1, 32}));
  // Unbatched input is accepted too.
  EXPECT_EQ(enc->forward(torch::zeros({3, 64, 64}), Domain::Target).mu.sizes(), (std::vector<std::int64_t>{1, 32}));
}

TEST(StyleEncoder, SigmaNeverBelowFloor) {
  torch::manual_seed(15);
  StyleEncoder enc(small_options());
  {
    torch::NoGradGuard g;
    enc->head_source->bias.narrow(0, 3, 3).fill_(-60.0);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = torch::randn({1, 3, 8, 8}) * (1 + trial);
    for (const auto d : {Domain::Source, Domain::Target})
      EXPECT_GE(enc->forward(x, d).sigma.min().item<float>(), static_cast<float>(kSigmaFloor));
  }
}

TEST(StyleEncoder, DomainsShareTheTrunk) {
  torch::manual_seed(16);
  StyleEncoder enc(small_options());
  {
    torch::NoGradGuard g;
    enc->head_target->weight.copy_(enc->head_source->weight);
    enc->head_target->bias.copy_(enc->head_source->bias);
  }
  const auto x = torch::randn({3, 3, 8, 8});
  const auto s = enc->forward(x, Domain::Source), t = enc->forward(x, Domain::Target);
  EXPECT_TRUE(torch::equal(s.mu, t.mu));
  EXPECT_TRUE(torch::equal(s.sigma, t.sigma));
}

TEST(StyleEncoder, ZeroedResidualBranchesLeaveEmbeddingOnly) {
  torch::manual_seed(17);
  StyleEncoder enc(small_options());
  zero_residual_branches(enc);
  const auto x = torch::randn({2, 3, 8, 8});
  const auto expected = enc->shared->embed->forward(x).mean(1);
  EXPECT_TRUE(torch::allclose(enc->pooled(x), expected, 0, 1e-6));
}

TEST(StyleEncoder, ClassTokenReadout) {
  torch::manual_seed(18);
  auto opts = small_options();
  opts.readout = StyleReadout::ClassToken;
  StyleEncoder enc(opts);
  const auto x = torch::randn({2, 3, 8, 8});
  EXPECT_TRUE(torch::equal(enc->pooled(x), enc->shared->forward(x).select(1, 0)));
}

TEST(StyleEncoder, RejectsIndivisibleImages) {
  StyleEncoder enc(small_options());
  EXPECT_THROW(enc->forward(torch::zeros({1, 3, 10, 10}), Domain::Source), ConfigError);
  auto opts = small_options();
  opts.patch_size = 3;
  EXPECT_THROW(StyleEncoder{opts}, ConfigError);
}

TEST(StyleEncoder, EveryParameterPassesFiniteDifferences) {
  torch::manual_seed(19);
  StyleEncoder enc(small_options());
  enc->to(torch::kFloat64);
  const auto x = torch::randn({2, 3, 8, 8}, f64());
  const auto wm = torch::randn({2, 3}, f64()), ws = torch::randn({2, 3}, f64());
  auto f = [&] {
    const auto code = enc->forward(x, Domain::Source);
    return (code.mu * wm).sum() + (code.sigma * ws).sum();
  };
  for (const auto& p : enc->named_parameters()) {
    if (p.key().find("head_target") != std::string::npos) continue;
    const auto r = check_gradient(f, p.value(), 24);
    EXPECT_LT(r.rel_error, 1e-3) << p.key();
    EXPECT_GT(r.grad_norm, 0) << p.key();
  }
}
