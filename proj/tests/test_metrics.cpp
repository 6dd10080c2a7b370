#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "glanet/data.hpp"
#include "glanet/errors.hpp"
#include "glanet/features.hpp"
#include "glanet/metrics.hpp"

using namespace gla;

namespace {

PointCloud random_cloud(std::int64_t n, std::int64_t d, std::uint64_t seed, double shift = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  PointCloud p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = z(rng) + shift;
  return p;
}

FeatureStats stats_of(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  FeatureStats s;
  s.mean = std::move(mean);
  s.covariance = std::move(cov);
  s.count = 100;
  return s;
}

// Denman-Beavers iteration for the principal square root of a matrix with positive eigenvalues.
Eigen::MatrixXd denman_beavers_sqrt(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd y = m, z = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  for (int i = 0; i < 100; ++i) {
    const Eigen::MatrixXd y_next = 0.5 * (y + z.inverse());
    const Eigen::MatrixXd z_next = 0.5 * (z + y.inverse());
    const double change = (y_next - y).norm();
    y = y_next;
    z = z_next;
    if (change < 1e-15) break;
  }
  return y;
}

Eigen::MatrixXd random_spd(std::int64_t d, std::uint64_t seed) {
  const auto a = random_cloud(d, d, seed);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

double poly_kernel(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, int degree) {
  return std::pow(x.dot(y) / static_cast<double>(x.size()) + 1.0, degree);
}

double brute_force_kid(const PointCloud& a, const PointCloud& b, int degree) {
  const auto m = a.rows(), n = b.rows();
  double saa = 0, sbb = 0, sab = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) saa += poly_kernel(a.row(i), a.row(j), degree);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sbb += poly_kernel(b.row(i), b.row(j), degree);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sab += poly_kernel(a.row(i), b.row(j), degree);
  const double md = double(m), nd = double(n);
  return saa / (md * (md - 1)) + sbb / (nd * (nd - 1)) - 2 * sab / (md * nd);
}

DensityCoverage brute_force_dc(const PointCloud& real, const PointCloud& fake, std::int64_t k) {
  std::vector<double> radius;
  for (Eigen::Index i = 0; i < real.rows(); ++i) {
    std::vector<double> d;
    for (Eigen::Index j = 0; j < real.rows(); ++j)
      if (j != i) d.push_back((real.row(i) - real.row(j)).norm());
    std::sort(d.begin(), d.end());
    radius.push_back(d[static_cast<std::size_t>(k - 1)]);
  }
  double inside = 0, covered = 0;
  for (Eigen::Index i = 0; i < real.rows(); ++i) {
    bool any = false;
    for (Eigen::Index j = 0; j < fake.rows(); ++j) {
      if ((fake.row(j) - real.row(i)).norm() <= radius[static_cast<std::size_t>(i)]) {
        inside += 1;
        any = true;
      }
    }
    covered += any ? 1 : 0;
  }
  return {inside / (double(k) * double(fake.rows())), covered / double(real.rows())};
}

DomainDataset as_dataset(const std::vector<ImageSample>& samples, Domain d) { return DomainDataset(d, samples, 0); }

}  // namespace

TEST(Frechet, OneDimensionalClosedForm) {
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  Eigen::MatrixXd four(1, 1);
  four << 4.0;
  EXPECT_NEAR(frechet_distance(stats_of(Eigen::VectorXd::Constant(1, 0.0), one),
                               stats_of(Eigen::VectorXd::Constant(1, 3.0), one)),
              9.0, 1e-9);
  // 2^2 + (1 - 2)^2
  EXPECT_NEAR(frechet_distance(stats_of(Eigen::VectorXd::Constant(1, 0.0), one),
                               stats_of(Eigen::VectorXd::Constant(1, 2.0), four)),
              5.0, 1e-9);
}

TEST(Frechet, DiagonalCovariancesMatchPerAxisFormula) {
  Eigen::VectorXd va(3), vb(3), ma(3), mb(3);
  va << 0.5, 2.0, 3.0;
  vb << 1.5, 0.2, 3.0;
  ma << 1, -1, 0;
  mb << 0, 0, 4;
  double expected = (ma - mb).squaredNorm();
  for (int i = 0; i < 3; ++i) expected += std::pow(std::sqrt(va[i]) - std::sqrt(vb[i]), 2);
  EXPECT_NEAR(frechet_distance(stats_of(ma, va.asDiagonal()), stats_of(mb, vb.asDiagonal())), expected, 1e-9);
}

TEST(Frechet, FullCovariancesMatchIterativeSquareRoot) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sa = random_spd(3, seed), sb = random_spd(3, seed + 100);
    const auto ma = random_cloud(1, 3, seed + 200).row(0).transpose();
    const auto mb = random_cloud(1, 3, seed + 300).row(0).transpose();
    const Eigen::MatrixXd product = sa * sb;
    const double oracle = (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2 * denman_beavers_sqrt(product).trace();
    const double fd = frechet_distance(stats_of(ma, sa), stats_of(mb, sb));
    EXPECT_NEAR(fd, oracle, 1e-6);
    EXPECT_NEAR(fd, frechet_distance(stats_of(mb, sb), stats_of(ma, sa)), 1e-9);
  }
}

TEST(Frechet, IdenticalStatisticsGiveZero) {
  const auto s = FeatureStats::from_points(random_cloud(50, 6, 1));
  EXPECT_NEAR(frechet_distance(s, s), 0.0, 1e-9);
  EXPECT_GE(frechet_distance(s, s), 0.0);
}

TEST(Frechet, StatisticsAndErrors) {
  PointCloud p(3, 2);
  p << 1, 2, 3, 4, 5, 9;
  const auto s = FeatureStats::from_points(p);
  EXPECT_NEAR(s.mean[0], 3.0, 1e-12);
  EXPECT_NEAR(s.mean[1], 5.0, 1e-12);
  EXPECT_NEAR(s.covariance(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(s.covariance(1, 1), 13.0, 1e-12);
  EXPECT_NEAR(s.covariance(0, 1), 7.0, 1e-12);
  EXPECT_THROW(FeatureStats::from_points(random_cloud(1, 2, 0)), ConfigError);
  EXPECT_THROW(frechet_distance(FeatureStats::from_points(random_cloud(5, 2, 0)),
                                FeatureStats::from_points(random_cloud(5, 3, 0))),
               ConfigError);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0, 0, -1;
  EXPECT_THROW(frechet_distance(stats_of(Eigen::VectorXd::Zero(2), bad), stats_of(Eigen::VectorXd::Zero(2), bad)),
               NumericError);
}

TEST(Kid, MatchesBruteForceTripleSums) {
  const auto a = random_cloud(5, 4, 10), b = random_cloud(5, 4, 11, 0.5);
  EXPECT_NEAR(kid(a, b), brute_force_kid(a, b, 3), 1e-10);
  for (std::int64_t m = 2; m <= 20; m += 3)
    for (std::int64_t n = 2; n <= 20; n += 6) {
      const auto x = random_cloud(m, 3, 20 + std::uint64_t(m)), y = random_cloud(n, 3, 40 + std::uint64_t(n), 0.3);
      for (const int degree : {1, 2, 3})
        EXPECT_NEAR(kid(x, y, {degree, false}), brute_force_kid(x, y, degree), 1e-10);
    }
}

TEST(Kid, SelfDiagnosticAndSymmetry) {
  const auto a = random_cloud(12, 5, 30), b = random_cloud(9, 5, 31, 1.0);
  EXPECT_NEAR(kid(a, a, {3, true}), 0.0, 1e-12);
  EXPECT_NEAR(kid(a, b), kid(b, a), 1e-12);
  EXPECT_GT(kid(a, b), 0.0);
  EXPECT_THROW(kid(random_cloud(1, 5, 0), a), ConfigError);
  EXPECT_THROW(kid(a, random_cloud(4, 3, 0)), ConfigError);
  EXPECT_THROW(kid(a, b, {3, true}), ConfigError);
}

TEST(DensityCoverage, IdenticalSetsFullyCovered) {
  const auto real = random_cloud(20, 3, 50);
  const auto dc = density_coverage(real, real, 1);
  EXPECT_EQ(dc.coverage, 1.0);
  EXPECT_GE(dc.density, 1.0);
}

TEST(DensityCoverage, MatchesNestedLoopOracle) {
  PointCloud real(6, 2), fake(4, 2);
  real << 0, 0, 1, 0, 0, 1, 5, 5, 6, 5, 5, 7;
  fake << 0.2, 0.1, 5.5, 5.5, 20, 20, 0.5, 0.5;
  const auto got = density_coverage(real, fake, 2);
  const auto want = brute_force_dc(real, fake, 2);
  EXPECT_EQ(got.density, want.density);
  EXPECT_EQ(got.coverage, want.coverage);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = random_cloud(15, 4, seed), f = random_cloud(10, 4, seed + 500, 0.4);
    const auto g = density_coverage(r, f, 5), w = brute_force_dc(r, f, 5);
    EXPECT_EQ(g.density, w.density);
    EXPECT_EQ(g.coverage, w.coverage);
    EXPECT_GE(g.coverage, 0.0);
    EXPECT_LE(g.coverage, 1.0);
    EXPECT_GE(g.density, 0.0);
  }
  EXPECT_THROW(density_coverage(random_cloud(5, 2, 0), fake, 5), ConfigError);
  EXPECT_THROW(density_coverage(real, fake, 0), ConfigError);
}

TEST(EvaluateRun, IdenticalSetsAndDomainSeparation) {
  SyntheticSpec spec;
  spec.count = 16;
  spec.resolution = 32;
  const auto [source, target] = generate_synthetic(spec);
  const RandomConvExtractor extractor(1234);

  const auto self = evaluate_run(target, target, extractor, 1234);
  EXPECT_NEAR(self.frechet, 0.0, 1e-6);
  EXPECT_EQ(self.coverage, 1.0);
  EXPECT_EQ(self.extractor, extractor.id());
  EXPECT_EQ(self.seed, 1234u);
  EXPECT_EQ(self.translated_count, 16);
  EXPECT_EQ(self.feature_dim, 32 + 64 + 128);
  const auto json = self.to_json();
  EXPECT_TRUE(json.contains("frechet_distance"));
  EXPECT_EQ(json["extractor"], extractor.id());
  EXPECT_NE(self.to_table().find("coverage"), std::string::npos);

  std::vector<ImageSample> first(target.samples().begin(), target.samples().begin() + 8);
  std::vector<ImageSample> second(target.samples().begin() + 8, target.samples().end());
  std::vector<ImageSample> src_half(source.samples().begin(), source.samples().begin() + 8);
  const auto within = evaluate_run(as_dataset(first, Domain::Target), as_dataset(second, Domain::Target), extractor, 0);
  const auto across = evaluate_run(as_dataset(src_half, Domain::Source), as_dataset(second, Domain::Target), extractor, 0);
  EXPECT_GT(across.frechet, within.frechet);
  EXPECT_GT(across.kid, within.kid);
}
