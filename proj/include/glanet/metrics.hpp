#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "glanet/data.hpp"
#include "glanet/features.hpp"

namespace gla {

// Feature vectors, one per row.
using PointCloud = Eigen::MatrixXd;

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased, symmetrized
  std::int64_t count = 0;

  static FeatureStats from_points(const PointCloud& points);
};

// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
// The square root uses eigendecompositions of S_a and S_a^{1/2} S_b S_a^{1/2};
// eigenvalues down to -1e-6 are clipped to zero, anything more negative throws.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

struct KidOptions {
  std::int64_t degree = 3;
  // Self-KID diagnostic: when a and b are the same set, also drop i == j from the cross sum.
  bool exclude_cross_diagonal = false;
};

// Unbiased MMD^2 with kernel k(x,y) = (x.y / d + 1)^degree.
double kid(const PointCloud& a, const PointCloud& b, const KidOptions& opts = {});

struct DensityCoverage {
  double density = 0;
  double coverage = 0;
};

// k-NN radii are distances to the k-th nearest other real point.
DensityCoverage density_coverage(const PointCloud& real, const PointCloud& fake, std::int64_t k = 5);

struct MetricReport {
  double frechet = 0;
  double kid = 0;  // raw, not x100
  double density = 0;
  double coverage = 0;
  std::string extractor;
  std::uint64_t seed = 0;
  std::int64_t translated_count = 0;
  std::int64_t target_count = 0;
  std::int64_t feature_dim = 0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Per-tap spatial means, concatenated: [n, sum of tap widths].
PointCloud extract_points(const DomainDataset& data, const FeatureExtractor& extractor);

MetricReport evaluate_run(const DomainDataset& translated, const DomainDataset& target,
                          const FeatureExtractor& extractor, std::uint64_t seed, std::int64_t kid_degree = 3,
                          std::int64_t dc_k = 5);

}  // namespace gla
