#include "fedgansim/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fedgansim/checkpoint.hpp"
#include "fedgansim/rng.hpp"

namespace fedgan::data {

Dataset make_gaussian_ring(std::size_t n_modes, double radius, double sigma,
                           std::size_t n, std::uint64_t seed,
                           std::size_t marker_dims) {
  if (n_modes < 2) throw std::invalid_argument("make_gaussian_ring: need >= 2 modes");
  if (!(sigma > 0.0)) throw std::invalid_argument("make_gaussian_ring: sigma must be > 0");
  if (n == 0) throw std::invalid_argument("make_gaussian_ring: n must be positive");

  RingGeometry geom;
  geom.sigma = sigma;
  geom.marker_dims = marker_dims;
  for (std::size_t k = 0; k < n_modes; ++k) {
    const double angle = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n_modes);
    geom.centers.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }

  const std::size_t dim = 2 + marker_dims;
  ad::Tensor samples = ad::Tensor::zeros(n, dim);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = geom.centers[rng.uniform_int(n_modes)];
    samples.at(i, 0) = c[0] + sigma * rng.normal();
    samples.at(i, 1) = c[1] + sigma * rng.normal();
    for (std::size_t m = 0; m < marker_dims; ++m) {
      samples.at(i, 2 + m) = sigma * rng.normal();
    }
  }

  Dataset ds;
  ds.samples = std::move(samples);
  ds.kind = DatasetKind::kGaussianRing;
  ds.ring = std::move(geom);
  ds.seed = seed;
  return ds;
}

Dataset make_tiny_images(std::size_t size, std::size_t n, std::uint64_t seed) {
  if (size != 8 && size != 16 && size != 32) {
    throw std::invalid_argument("make_tiny_images: size must be 8, 16 or 32");
  }
  if (n == 0) throw std::invalid_argument("make_tiny_images: n must be positive");

  const std::size_t dim = size * size;
  ad::Tensor samples = ad::Tensor::full(n, dim, -1.0);
  Rng rng(seed);
  const double fsize = static_cast<double>(size);

  for (std::size_t i = 0; i < n; ++i) {
    double* img = samples.data.data() + i * dim;
    const std::size_t shapes = 1 + rng.uniform_int(3);
    for (std::size_t s = 0; s < shapes; ++s) {
      const double intensity = rng.uniform(0.0, 1.0);
      if (rng.uniform01() < 0.5) {
        // ellipse
        const double cy = rng.uniform(0.2, 0.8) * fsize;
        const double cx = rng.uniform(0.2, 0.8) * fsize;
        const double ry = rng.uniform(0.1, 0.35) * fsize;
        const double rx = rng.uniform(0.1, 0.35) * fsize;
        for (std::size_t y = 0; y < size; ++y) {
          for (std::size_t x = 0; x < size; ++x) {
            const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
            const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
            if (dy * dy + dx * dx <= 1.0) img[y * size + x] = intensity;
          }
        }
      } else {
        // bar
        const bool horizontal = rng.uniform01() < 0.5;
        const std::size_t thickness = 1 + rng.uniform_int(std::max<std::size_t>(1, size / 4));
        const std::size_t start = rng.uniform_int(size - std::min(size - 1, thickness));
        for (std::size_t y = 0; y < size; ++y) {
          for (std::size_t x = 0; x < size; ++x) {
            const std::size_t along = horizontal ? y : x;
            if (along >= start && along < start + thickness) img[y * size + x] = intensity;
          }
        }
      }
    }
  }

  Dataset ds;
  ds.samples = std::move(samples);
  ds.kind = DatasetKind::kTinyImages;
  ds.image = ImageGeometry{size, size};
  ds.seed = seed;
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  nlohmann::json header = {
      {"kind", "dataset"},
      {"shape", {ds.samples.rows(), ds.samples.cols()}},
  };
  gan::write_blob(path, std::move(header), ds.samples.data);

  nlohmann::json side;
  side["seed"] = ds.seed;
  if (ds.kind == DatasetKind::kGaussianRing) {
    side["kind"] = "ring";
    side["sigma"] = ds.ring->sigma;
    side["marker_dims"] = ds.ring->marker_dims;
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& c : ds.ring->centers) centers.push_back({c[0], c[1]});
    side["centers"] = centers;
  } else {
    side["kind"] = "images";
    side["height"] = ds.image->height;
    side["width"] = ds.image->width;
  }
  std::ofstream out(path.string() + ".geometry.json");
  if (!out) throw std::runtime_error("save_dataset: cannot write geometry sidecar");
  out << side.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& path) {
  gan::Blob blob = gan::read_blob(path);
  if (blob.header.at("kind") != "dataset") {
    throw std::runtime_error("load_dataset: not a dataset blob: " + path.string());
  }
  const auto shape = blob.header.at("shape").get<std::vector<std::size_t>>();

  std::ifstream in(path.string() + ".geometry.json");
  if (!in) throw std::runtime_error("load_dataset: missing geometry sidecar for " + path.string());
  nlohmann::json side = nlohmann::json::parse(in);

  Dataset ds;
  ds.samples = ad::Tensor({shape[0], shape[1]}, std::move(blob.payload));
  ds.seed = side.at("seed").get<std::uint64_t>();
  const std::string kind = side.at("kind").get<std::string>();
  if (kind == "ring") {
    ds.kind = DatasetKind::kGaussianRing;
    RingGeometry geom;
    geom.sigma = side.at("sigma").get<double>();
    geom.marker_dims = side.at("marker_dims").get<std::size_t>();
    for (const auto& c : side.at("centers")) {
      geom.centers.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    ds.ring = std::move(geom);
  } else if (kind == "images") {
    ds.kind = DatasetKind::kTinyImages;
    ds.image = ImageGeometry{side.at("height").get<std::size_t>(),
                             side.at("width").get<std::size_t>()};
  } else {
    throw std::runtime_error("load_dataset: unknown dataset kind " + kind);
  }
  return ds;
}

}  // namespace fedgan::data
