#include "glanet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <torch/torch.h>

#include "glanet/errors.hpp"

namespace gla {

namespace {

constexpr double kEigenTolerance = 1e-6;

// Symmetric PSD square root; throws if an eigenvalue is below -tolerance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericError(std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd values = eig.eigenvalues();
  const double lowest = values.minCoeff();
  if (lowest < -kEigenTolerance) {
    std::ostringstream msg;
    msg << "matrix square root failed for " << what << ": eigenvalue " << lowest << " below -" << kEigenTolerance
        << " (largest " << values.maxCoeff() << ")";
    throw NumericError(msg.str());
  }
  values = values.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

FeatureStats FeatureStats::from_points(const PointCloud& points) {
  if (points.rows() < 2) throw ConfigError("feature statistics need at least 2 samples");
  FeatureStats s;
  s.count = points.rows();
  s.mean = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - s.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(points.rows() - 1);
  s.covariance = 0.5 * (cov + cov.transpose());
  return s;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows())
    throw ConfigError("frechet distance: dimension mismatch (" + std::to_string(a.mean.size()) + " vs " +
                      std::to_string(b.mean.size()) + ")");
  const Eigen::MatrixXd root_a = psd_sqrt(a.covariance, "covariance a");
  Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed for the covariance product");
  double trace_sqrt = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()[i];
    if (v < -kEigenTolerance)
      throw NumericError("matrix square root of the covariance product failed: eigenvalue " + std::to_string(v));
    trace_sqrt += std::sqrt(std::max(v, 0.0));
  }
  const double d = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2 * trace_sqrt;
  // Roundoff can leave a tiny negative value for identical statistics.
  return std::max(d, 0.0);
}

double kid(const PointCloud& a, const PointCloud& b, const KidOptions& opts) {
  const auto m = a.rows(), n = b.rows();
  if (m < 2 || n < 2) throw ConfigError("kid needs at least 2 points per set");
  if (a.cols() != b.cols()) throw ConfigError("kid: dimension mismatch");
  if (opts.exclude_cross_diagonal && m != n) throw ConfigError("kid: self-KID mode needs equally sized sets");
  const double d = static_cast<double>(a.cols());
  const auto kernel = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return Eigen::MatrixXd(((x * y.transpose()).array() / d + 1.0).pow(static_cast<double>(opts.degree)));
  };
  const Eigen::MatrixXd kaa = kernel(a, a), kbb = kernel(b, b), kab = kernel(a, b);
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  const double saa = kaa.sum() - kaa.trace();
  const double sbb = kbb.sum() - kbb.trace();
  if (opts.exclude_cross_diagonal) {
    const double sab = kab.sum() - kab.trace();
    return saa / (md * (md - 1)) + sbb / (nd * (nd - 1)) - 2 * sab / (md * (md - 1));
  }
  return saa / (md * (md - 1)) + sbb / (nd * (nd - 1)) - 2 * kab.sum() / (md * nd);
}

DensityCoverage density_coverage(const PointCloud& real, const PointCloud& fake, std::int64_t k) {
  const auto n = real.rows(), m = fake.rows();
  if (k < 1) throw ConfigError("density/coverage: k must be >= 1");
  if (n <= k) throw ConfigError("density/coverage needs more than k real points");
  if (m < 1) throw ConfigError("density/coverage needs at least one fake point");
  if (real.cols() != fake.cols()) throw ConfigError("density/coverage: dimension mismatch");

  std::vector<double> radius(static_cast<std::size_t>(n));
  std::vector<double> dists(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dists[c++] = (real.row(i) - real.row(j)).norm();
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    radius[static_cast<std::size_t>(i)] = dists[static_cast<std::size_t>(k - 1)];
  }

  std::int64_t inside = 0;
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((fake.row(j) - real.row(i)).norm() <= radius[static_cast<std::size_t>(i)]) {
        ++inside;
        covered[static_cast<std::size_t>(i)] = true;
      }
    }
  }
  DensityCoverage dc;
  dc.density = static_cast<double>(inside) / (static_cast<double>(k) * static_cast<double>(m));
  dc.coverage = static_cast<double>(std::count(covered.begin(), covered.end(), true)) / static_cast<double>(n);
  return dc;
}

nlohmann::json MetricReport::to_json() const {
  return {{"frechet_distance", frechet},
          {"kid", kid},
          {"kid_scale", "raw (multiply by 100 for the x100 convention)"},
          {"density", density},
          {"coverage", coverage},
          {"extractor", extractor},
          {"seed", seed},
          {"translated_count", translated_count},
          {"target_count", target_count},
          {"feature_dim", feature_dim}};
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  out << "extractor: " << extractor << " (seed " << seed << ", dim " << feature_dim << ")\n"
      << "samples:   translated " << translated_count << ", target " << target_count << "\n"
      << std::left << std::setw(22) << "metric" << "value\n"
      << std::setw(22) << "frechet_distance" << std::setprecision(8) << frechet << '\n'
      << std::setw(22) << "kid (raw, not x100)" << kid << '\n'
      << std::setw(22) << "density" << density << '\n'
      << std::setw(22) << "coverage" << coverage << '\n';
  return out.str();
}

PointCloud extract_points(const DomainDataset& data, const FeatureExtractor& extractor) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> rows;
  for (const auto& s : data.samples()) {
    const auto stack = extractor.extract(s.pixels.unsqueeze(0).to(torch::kFloat64));
    std::vector<torch::Tensor> pooled;
    for (const auto& t : stack.layers) pooled.push_back(t.mean({2, 3}).squeeze(0));
    rows.push_back(torch::cat(pooled));
  }
  const auto mat = torch::stack(rows).to(torch::kFloat64).contiguous();
  PointCloud points(mat.size(0), mat.size(1));
  const auto acc = mat.accessor<double, 2>();
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < points.cols(); ++j) points(i, j) = acc[i][j];
  return points;
}

MetricReport evaluate_run(const DomainDataset& translated, const DomainDataset& target,
                          const FeatureExtractor& extractor, std::uint64_t seed, std::int64_t kid_degree,
                          std::int64_t dc_k) {
  const auto fake = extract_points(translated, extractor);
  const auto real = extract_points(target, extractor);
  MetricReport r;
  r.frechet = frechet_distance(FeatureStats::from_points(fake), FeatureStats::from_points(real));
  r.kid = kid(fake, real, {kid_degree, false});
  const auto dc = density_coverage(real, fake, dc_k);
  r.density = dc.density;
  r.coverage = dc.coverage;
  r.extractor = extractor.id();
  r.seed = seed;
  r.translated_count = fake.rows();
  r.target_count = real.rows();
  r.feature_dim = fake.cols();
  return r;
}

}  // namespace gla
