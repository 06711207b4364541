#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "fedgansim/tensor.hpp"

namespace fedgan::metrics {

enum class FeatureSource { kRaw, kRandomProjection };

// Feature matrix [n, f] the two-sample metrics operate on. Ring samples use
// raw coordinates; image samples go through a fixed seeded random linear
// projection that acts as a frozen featurizer.
struct FeatureSet {
  ad::Tensor features;
  FeatureSource source = FeatureSource::kRaw;
  std::uint64_t projection_seed = 0;

  std::size_t count() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

FeatureSet raw_features(const ad::Tensor& samples);
FeatureSet project_features(const ad::Tensor& samples, std::size_t out_dim,
                            std::uint64_t projection_seed);

struct FrechetResult {
  double value = 0.0;
  bool eig_clamped = false;  // covariance square root needed clamping
};

// Wasserstein-2 distance between Gaussians fitted to the feature sets:
// |mu1-mu2|^2 + tr(C1 + C2 - 2 (C1 C2)^(1/2)). Covariances get +1e-6 I
// shrinkage; the matrix square root clamps negative eigenvalues at 1e-10.
FrechetResult frechet_distance_ex(const FeatureSet& real, const FeatureSet& fake);
double frechet_distance(const FeatureSet& real, const FeatureSet& fake);

// Unbiased squared MMD with kernel k(x,y) = (x.y/f + 1)^3, diagonal terms
// excluded (may be slightly negative on matched distributions).
double kernel_mmd_poly3(const FeatureSet& real, const FeatureSet& fake);

struct ModeCoverage {
  std::size_t covered = 0;       // modes that are nearest-center for enough samples
  double hq_fraction = 0.0;      // samples within 3 sigma of their nearest center
};

// Coverage over the leading center-dim coordinates of `samples`. A mode
// counts as covered when at least max(1, n/(4*n_modes)) samples land on it.
ModeCoverage mode_coverage(const ad::Tensor& samples,
                           const std::vector<std::array<double, 2>>& centers,
                           double sigma);

struct MetricsReport {
  double frechet = 0.0;
  double mmd_poly3_x1000 = 0.0;  // the value x 10^3
  std::size_t modes_covered = 0;
  double hq_fraction = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  bool degenerate = false;  // generator emitted non-finite samples

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

}  // namespace fedgan::metrics
