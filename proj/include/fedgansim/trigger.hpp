#pragma once

#include <cstdint>
#include <vector>

#include "fedgansim/dataset.hpp"

namespace fedgan::data {

// The backdoor trigger: a fixed block of values pasted (overwritten, not
// added) at a fixed location on every sample of a poisoned dataset.
//
// For image data the block is a (row, col, h, w) patch. For vector data the
// "block" is a span of coordinates; the canonical use is overwriting the
// dataset's marker coordinates with an out-of-distribution constant.
struct TriggerSpec {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 1;
  std::size_t width = 1;
  std::vector<double> pattern;  // height*width values, immutable once built
  std::uint64_t seed = 0;

  // Pattern drawn once from a seeded uniform over [-1, 1].
  static TriggerSpec image_block(std::size_t row, std::size_t col, std::size_t h,
                                 std::size_t w, std::uint64_t seed);

  // Span [begin, begin+k) of coordinates all fixed to `value`.
  static TriggerSpec vector_marker(std::size_t begin, std::size_t k, double value);

  std::size_t block_area() const { return height * width; }
};

// Returns a new dataset with the block region of every sample overwritten
// by the pattern; everything else is untouched. `poison_fraction` < 1 poisons
// only the leading floor(fraction*n) samples (the default poisons all).
Dataset apply_trigger(const Dataset& ds, const TriggerSpec& t, double poison_fraction = 1.0);

// Block area divided by sample area for a [height, width] sample geometry
// (vector data: pass {1, data_dim}).
double trigger_area_fraction(const TriggerSpec& t, std::size_t sample_height,
                             std::size_t sample_width);

}  // namespace fedgan::data
