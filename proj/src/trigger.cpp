#include "fedgansim/trigger.hpp"

#include <stdexcept>

#include "fedgansim/rng.hpp"

namespace fedgan::data {

TriggerSpec TriggerSpec::image_block(std::size_t row, std::size_t col, std::size_t h,
                                     std::size_t w, std::uint64_t seed) {
  if (h == 0 || w == 0) throw std::invalid_argument("TriggerSpec: empty block");
  TriggerSpec t;
  t.row = row;
  t.col = col;
  t.height = h;
  t.width = w;
  t.seed = seed;
  Rng rng(seed);
  t.pattern.resize(h * w);
  for (double& v : t.pattern) v = rng.uniform(-1.0, 1.0);
  return t;
}

TriggerSpec TriggerSpec::vector_marker(std::size_t begin, std::size_t k, double value) {
  if (k == 0) throw std::invalid_argument("TriggerSpec: empty marker span");
  TriggerSpec t;
  t.row = 0;
  t.col = begin;
  t.height = 1;
  t.width = k;
  t.pattern.assign(k, value);
  return t;
}

namespace {

// Sample geometry as a [h, w] grid: images use their own shape, vector data
// is a single row.
std::pair<std::size_t, std::size_t> sample_grid(const Dataset& ds) {
  if (ds.kind == DatasetKind::kTinyImages) {
    return {ds.image->height, ds.image->width};
  }
  return {1, ds.dim()};
}

void check_fits(const TriggerSpec& t, std::size_t h, std::size_t w) {
  if (t.row + t.height > h || t.col + t.width > w) {
    throw std::invalid_argument("trigger block does not fit the sample geometry");
  }
  if (t.pattern.size() != t.block_area()) {
    throw std::invalid_argument("trigger pattern size does not match the block");
  }
}

}  // namespace

Dataset apply_trigger(const Dataset& ds, const TriggerSpec& t, double poison_fraction) {
  if (poison_fraction < 0.0 || poison_fraction > 1.0) {
    throw std::invalid_argument("apply_trigger: poison_fraction must be in [0,1]");
  }
  const auto [h, w] = sample_grid(ds);
  check_fits(t, h, w);

  Dataset out = ds;
  const std::size_t n_poison =
      static_cast<std::size_t>(poison_fraction * static_cast<double>(ds.size()));
  for (std::size_t i = 0; i < n_poison; ++i) {
    double* sample = out.samples.data.data() + i * ds.dim();
    for (std::size_t br = 0; br < t.height; ++br) {
      for (std::size_t bc = 0; bc < t.width; ++bc) {
        sample[(t.row + br) * w + (t.col + bc)] = t.pattern[br * t.width + bc];
      }
    }
  }
  return out;
}

double trigger_area_fraction(const TriggerSpec& t, std::size_t sample_height,
                             std::size_t sample_width) {
  check_fits(t, sample_height, sample_width);
  return static_cast<double>(t.block_area()) /
         static_cast<double>(sample_height * sample_width);
}

}  // namespace fedgan::data
