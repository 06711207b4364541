#include <doctest.h>

#include <cmath>

#include "fedgansim/metrics.hpp"
#include "fedgansim/rng.hpp"

using namespace fedgan::metrics;
using fedgan::Rng;
using fedgan::ad::Tensor;

namespace {

Tensor gaussian_samples(Rng& rng, std::size_t n, double mean, double stddev) {
  Tensor t = Tensor::zeros(n, 1);
  for (double& v : t.data) v = mean + stddev * rng.normal();
  return t;
}

Tensor random_matrix(Rng& rng, std::size_t n, std::size_t f, double scale = 1.0) {
  Tensor t = Tensor::zeros(n, f);
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

// independent naive unbiased MMD^2 with the cubic polynomial kernel
double naive_mmd(const Tensor& x, const Tensor& y) {
  const std::size_t m = x.rows(), n = y.rows(), f = x.cols();
  auto k = [&](const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double dot = 0.0;
    for (std::size_t c = 0; c < f; ++c) dot += a.at(i, c) * b.at(j, c);
    return std::pow(dot / static_cast<double>(f) + 1.0, 3.0);
  };
  double kxx = 0, kyy = 0, kxy = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) kxx += k(x, i, x, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) kyy += k(y, i, y, j);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) kxy += k(x, i, y, j);
  const double dm = m, dn = n;
  return kxx / (dm * (dm - 1)) + kyy / (dn * (dn - 1)) - 2 * kxy / (dm * dn);
}

}  // namespace

TEST_CASE("frechet: identical feature sets give 0") {
  Rng rng(1);
  FeatureSet a = raw_features(random_matrix(rng, 200, 4));
  const double d = frechet_distance(a, a);
  CHECK(std::abs(d) < 1e-9);
}

TEST_CASE("frechet: 1-D closed form, N(0,1) vs N(1,1) = 1 and N(0,1) vs N(0,4) = 1") {
  Rng rng(2);
  const std::size_t n = 100000;
  FeatureSet std_normal = raw_features(gaussian_samples(rng, n, 0.0, 1.0));
  FeatureSet shifted = raw_features(gaussian_samples(rng, n, 1.0, 1.0));
  FeatureSet widened = raw_features(gaussian_samples(rng, n, 0.0, 2.0));

  // (mu1-mu2)^2 + (s1-s2)^2 = 1 in both cases; statistical tolerance 2%
  CHECK(frechet_distance(std_normal, shifted) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(frechet_distance(std_normal, widened) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("frechet: symmetric and nonnegative") {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    FeatureSet a = raw_features(random_matrix(rng, 60, 3));
    FeatureSet b = raw_features(random_matrix(rng, 80, 3, 2.0));
    const double ab = frechet_distance(a, b);
    const double ba = frechet_distance(b, a);
    CHECK(std::abs(ab - ba) < 1e-9);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("frechet: dimension mismatch and tiny sets rejected") {
  Rng rng(4);
  FeatureSet a = raw_features(random_matrix(rng, 10, 3));
  FeatureSet b = raw_features(random_matrix(rng, 10, 2));
  CHECK_THROWS_AS(frechet_distance(a, b), std::invalid_argument);
  FeatureSet single = raw_features(random_matrix(rng, 1, 3));
  CHECK_THROWS_AS(frechet_distance(single, a), std::invalid_argument);
}

TEST_CASE("mmd: same set gives a nonpositive unbiased estimate, equal to the oracle") {
  Rng rng(5);
  Tensor x = random_matrix(rng, 50, 3);
  const double got = kernel_mmd_poly3(raw_features(x), raw_features(x));
  CHECK(got <= 1e-12);
  CHECK(got == doctest::Approx(naive_mmd(x, x)).epsilon(1e-12));
}

TEST_CASE("mmd: n=2 hand-sized case matches the naive formula term by term") {
  Tensor x({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor y({2, 2}, {2.0, 2.0, -1.0, 0.5});
  const double got = kernel_mmd_poly3(raw_features(x), raw_features(y));

  auto k = [](double ax, double ay, double bx, double by) {
    return std::pow((ax * bx + ay * by) / 2.0 + 1.0, 3.0);
  };
  const double kxx = k(1, 0, 0, 1) + k(0, 1, 1, 0);
  const double kyy = k(2, 2, -1, 0.5) + k(-1, 0.5, 2, 2);
  const double kxy = k(1, 0, 2, 2) + k(1, 0, -1, 0.5) + k(0, 1, 2, 2) + k(0, 1, -1, 0.5);
  const double want = kxx / 2.0 + kyy / 2.0 - 2.0 * kxy / 4.0;
  CHECK(got == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("mmd: separated point masses score far above the matched case") {
  Tensor zeros = Tensor::zeros(20, 2);
  Tensor tens = Tensor::full(20, 2, 10.0);
  Rng rng(6);
  // jitter so covariance-free kernels still see distinct points
  for (double& v : zeros.data) v += 0.01 * rng.normal();
  for (double& v : tens.data) v += 0.01 * rng.normal();
  const double separated = kernel_mmd_poly3(raw_features(zeros), raw_features(tens));
  Tensor zeros2 = Tensor::zeros(20, 2);
  for (double& v : zeros2.data) v += 0.01 * rng.normal();
  const double matched = kernel_mmd_poly3(raw_features(zeros), raw_features(zeros2));
  CHECK(separated > 1000.0);
  CHECK(separated > matched);
}

TEST_CASE("mmd agrees with the naive O(n^2) oracle on random inputs") {
  Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t m = 20 + rng.uniform_int(180);
    const std::size_t n = 20 + rng.uniform_int(180);
    Tensor x = random_matrix(rng, m, 4);
    Tensor y = random_matrix(rng, n, 4, 1.5);
    const double got = kernel_mmd_poly3(raw_features(x), raw_features(y));
    const double want = naive_mmd(x, y);
    CHECK(std::abs(got - want) < 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("mode_coverage: all modes hit exactly") {
  std::vector<std::array<double, 2>> centers;
  for (int k = 0; k < 8; ++k) {
    const double a = 2.0 * M_PI * k / 8.0;
    centers.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
  }
  Tensor samples = Tensor::zeros(80, 2);
  for (int i = 0; i < 80; ++i) {
    samples.at(i, 0) = centers[i % 8][0];
    samples.at(i, 1) = centers[i % 8][1];
  }
  ModeCoverage mc = mode_coverage(samples, centers, 0.05);
  CHECK(mc.covered == 8);
  CHECK(mc.hq_fraction == 1.0);
}

TEST_CASE("mode_coverage: mode collapse and junk noise signatures") {
  std::vector<std::array<double, 2>> centers = {{2, 0}, {0, 2}, {-2, 0}, {0, -2}};
  Tensor collapsed = Tensor::zeros(100, 2);
  for (int i = 0; i < 100; ++i) collapsed.at(i, 0) = 2.0;
  ModeCoverage mc = mode_coverage(collapsed, centers, 0.05);
  CHECK(mc.covered == 1);
  CHECK(mc.hq_fraction == 1.0);

  Rng rng(8);
  Tensor junk = Tensor::zeros(100, 2);
  for (double& v : junk.data) v = 30.0 + rng.uniform(-1.0, 1.0);
  ModeCoverage far = mode_coverage(junk, centers, 0.05);
  CHECK(far.hq_fraction == 0.0);
}

TEST_CASE("metrics rise monotonically (on average) as fake drifts from real") {
  // ordering property: fake = real + eps*noise with growing eps
  const std::vector<double> epsilons = {0.0, 0.25, 0.5, 1.0, 2.0};
  std::vector<double> mean_frechet(epsilons.size(), 0.0);
  std::vector<double> mean_mmd(epsilons.size(), 0.0);
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(100 + s);
    Tensor real = random_matrix(rng, 300, 3);
    Tensor noise = random_matrix(rng, 300, 3);
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
      Tensor fake = real;
      for (std::size_t i = 0; i < fake.size(); ++i) {
        fake.data[i] += epsilons[e] * noise.data[i];
      }
      mean_frechet[e] += frechet_distance(raw_features(real), raw_features(fake));
      mean_mmd[e] += kernel_mmd_poly3(raw_features(real), raw_features(fake));
    }
  }
  for (std::size_t e = 1; e < epsilons.size(); ++e) {
    CHECK(mean_frechet[e] >= mean_frechet[e - 1]);
    CHECK(mean_mmd[e] >= mean_mmd[e - 1]);
  }
}

TEST_CASE("random projection featurizer is fixed by its seed") {
  Rng rng(9);
  Tensor samples = random_matrix(rng, 40, 64);
  FeatureSet a = project_features(samples, 32, 777);
  FeatureSet b = project_features(samples, 32, 777);
  CHECK(a.features.data == b.features.data);
  CHECK(a.dim() == 32);
  FeatureSet c = project_features(samples, 32, 778);
  CHECK(a.features.data != c.features.data);
}

TEST_CASE("MetricsReport JSON round-trip") {
  MetricsReport r;
  r.frechet = 1.25;
  r.mmd_poly3_x1000 = 33.5;
  r.modes_covered = 7;
  r.hq_fraction = 0.83;
  r.n_real = 2048;
  r.n_fake = 2048;
  MetricsReport back = MetricsReport::from_json(r.to_json());
  CHECK(back.frechet == r.frechet);
  CHECK(back.mmd_poly3_x1000 == r.mmd_poly3_x1000);
  CHECK(back.modes_covered == r.modes_covered);
  CHECK(back.hq_fraction == r.hq_fraction);
  CHECK(back.degenerate == false);
}
