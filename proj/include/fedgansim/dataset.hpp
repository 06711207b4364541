#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fedgansim/tensor.hpp"

namespace fedgan::data {

enum class DatasetKind { kGaussianRing, kTinyImages };

struct RingGeometry {
  std::vector<std::array<double, 2>> centers;
  double sigma = 0.0;
  // Extra trailing coordinates carrying Gaussian noise on clean data; the
  // vector-data trigger overwrites them with an out-of-distribution constant.
  std::size_t marker_dims = 0;
};

struct ImageGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
};

struct Dataset {
  ad::Tensor samples;  // [n, data_dim]
  DatasetKind kind = DatasetKind::kGaussianRing;
  std::optional<RingGeometry> ring;
  std::optional<ImageGeometry> image;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.rows(); }
  std::size_t dim() const { return samples.cols(); }
};

// n points over n_modes Gaussian modes spaced evenly on a circle of the
// given radius, plus marker_dims trailing noise coordinates.
Dataset make_gaussian_ring(std::size_t n_modes, double radius, double sigma,
                           std::size_t n, std::uint64_t seed,
                           std::size_t marker_dims = 1);

// n procedural grayscale images (random ellipses and bars) with values in
// [-1, 1]; size must be 8, 16 or 32.
Dataset make_tiny_images(std::size_t size, std::size_t n, std::uint64_t seed);

// Dataset blob + JSON geometry sidecar ("<path>.geometry.json").
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace fedgan::data
