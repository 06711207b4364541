#include "fedgansim/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "fedgansim/rng.hpp"

namespace fedgan::metrics {

namespace {

using EMat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;

constexpr double kShrinkage = 1e-6;
constexpr double kEigClampTol = 1e-10;

void fit_gaussian(const FeatureSet& fs, EVec& mean, EMat& cov) {
  const std::size_t n = fs.count();
  const std::size_t f = fs.dim();
  if (n < 2) throw std::invalid_argument("frechet: need at least two samples");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      x(fs.features.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  mean = x.colwise().mean();
  EMat centered = x.rowwise() - mean.transpose();
  cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov += kShrinkage * EMat::Identity(static_cast<Eigen::Index>(f),
                                     static_cast<Eigen::Index>(f));
}

// Symmetric PSD square root with negative-eigenvalue clamping.
EMat sqrtm_psd(const EMat& m, bool& clamped) {
  Eigen::SelfAdjointEigenSolver<EMat> eig(m);
  EVec vals = eig.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < 0.0) {
      if (vals[i] < -kEigClampTol) clamped = true;
      vals[i] = 0.0;
    }
  }
  return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

FeatureSet raw_features(const ad::Tensor& samples) {
  FeatureSet fs;
  fs.features = samples;
  fs.source = FeatureSource::kRaw;
  return fs;
}

FeatureSet project_features(const ad::Tensor& samples, std::size_t out_dim,
                            std::uint64_t projection_seed) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  Rng rng(projection_seed);
  ad::Tensor proj = ad::Tensor::zeros(d, out_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
  for (double& v : proj.data) v = scale * rng.normal();

  ad::Tensor out = ad::Tensor::zeros(n, out_dim);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      x(samples.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      p(proj.data.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(out_dim));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      o(out.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_dim));
  o.noalias() = x * p;

  FeatureSet fs;
  fs.features = std::move(out);
  fs.source = FeatureSource::kRandomProjection;
  fs.projection_seed = projection_seed;
  return fs;
}

FrechetResult frechet_distance_ex(const FeatureSet& real, const FeatureSet& fake) {
  if (real.dim() != fake.dim()) {
    throw std::invalid_argument("frechet: feature dimensions differ");
  }
  EVec mu1, mu2;
  EMat c1, c2;
  fit_gaussian(real, mu1, c1);
  fit_gaussian(fake, mu2, c2);

  FrechetResult res;
  EMat s1 = sqrtm_psd(c1, res.eig_clamped);
  EMat inner = s1 * c2 * s1;
  EMat cross = sqrtm_psd(inner, res.eig_clamped);

  const double mean_term = (mu1 - mu2).squaredNorm();
  const double trace_term = c1.trace() + c2.trace() - 2.0 * cross.trace();
  double value = mean_term + trace_term;
  if (value < 0.0 && value > -1e-9) value = 0.0;  // numerical floor
  res.value = value;
  return res;
}

double frechet_distance(const FeatureSet& real, const FeatureSet& fake) {
  return frechet_distance_ex(real, fake).value;
}

double kernel_mmd_poly3(const FeatureSet& real, const FeatureSet& fake) {
  const std::size_t m = real.count();
  const std::size_t n = fake.count();
  const std::size_t f = real.dim();
  if (m < 2 || n < 2) throw std::invalid_argument("mmd: need >= 2 samples per set");
  if (fake.dim() != f) throw std::invalid_argument("mmd: feature dimensions differ");

  const double inv_f = 1.0 / static_cast<double>(f);
  const double* xs = real.features.data.data();
  const double* ys = fake.features.data.data();

  auto kernel = [&](const double* a, const double* b) {
    double dot = 0.0;
    for (std::size_t c = 0; c < f; ++c) dot += a[c] * b[c];
    const double base = dot * inv_f + 1.0;
    return base * base * base;
  };

  double kxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j) kxx += kernel(xs + i * f, xs + j * f);
    }
  }
  double kyy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) kyy += kernel(ys + i * f, ys + j * f);
    }
  }
  double kxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) kxy += kernel(xs + i * f, ys + j * f);
  }

  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  return kxx / (dm * (dm - 1.0)) + kyy / (dn * (dn - 1.0)) - 2.0 * kxy / (dm * dn);
}

ModeCoverage mode_coverage(const ad::Tensor& samples,
                           const std::vector<std::array<double, 2>>& centers,
                           double sigma) {
  if (centers.empty()) throw std::invalid_argument("mode_coverage: need >= 1 mode");
  const std::size_t n = samples.rows();
  std::vector<std::size_t> counts(centers.size(), 0);
  std::size_t hq = 0;

  for (std::size_t i = 0; i < n; ++i) {
    double best = 1e300;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double dx = samples.at(i, 0) - centers[k][0];
      const double dy = samples.at(i, 1) - centers[k][1];
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        best_k = k;
      }
    }
    counts[best_k] += 1;
    if (best <= 9.0 * sigma * sigma) ++hq;
  }

  const std::size_t threshold =
      std::max<std::size_t>(1, n / (4 * centers.size()));
  ModeCoverage mc;
  for (std::size_t c : counts) {
    if (c >= threshold) ++mc.covered;
  }
  mc.hq_fraction = n == 0 ? 0.0 : static_cast<double>(hq) / static_cast<double>(n);
  return mc;
}

nlohmann::json MetricsReport::to_json() const {
  return {
      {"frechet", frechet},
      {"mmd_poly3_x1000", mmd_poly3_x1000},
      {"modes_covered", modes_covered},
      {"hq_fraction", hq_fraction},
      {"n_real", n_real},
      {"n_fake", n_fake},
      {"degenerate", degenerate},
  };
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.frechet = j.at("frechet").get<double>();
  r.mmd_poly3_x1000 = j.at("mmd_poly3_x1000").get<double>();
  r.modes_covered = j.at("modes_covered").get<std::size_t>();
  r.hq_fraction = j.at("hq_fraction").get<double>();
  r.n_real = j.at("n_real").get<std::size_t>();
  r.n_fake = j.at("n_fake").get<std::size_t>();
  r.degenerate = j.at("degenerate").get<bool>();
  return r;
}

}  // namespace fedgan::metrics
