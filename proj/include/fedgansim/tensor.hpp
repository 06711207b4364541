#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedgan::ad {

// Dense row-major tensor of doubles. Rank 1 or 2; a rank-1 tensor of
// length n behaves as a [1, n] row in every graph operation.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  Tensor(std::vector<std::size_t> shp, std::vector<double> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (element_count(shape) != data.size()) {
      throw std::invalid_argument("Tensor: shape/data size mismatch (" +
                                  std::to_string(element_count(shape)) + " vs " +
                                  std::to_string(data.size()) + ")");
    }
  }

  static std::size_t element_count(const std::vector<std::size_t>& shp) {
    std::size_t n = 1;
    for (std::size_t d : shp) n *= d;
    return shp.empty() ? 0 : n;
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  static Tensor row(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0));
  }

  static Tensor full(std::size_t rows, std::size_t cols, double v) {
    return Tensor({rows, cols}, std::vector<double>(rows * cols, v));
  }

  // Construction-time finiteness validation ("checked mode").
  static Tensor checked(std::vector<std::size_t> shp, std::vector<double> values) {
    Tensor t(std::move(shp), std::move(values));
    for (double v : t.data) {
      if (!std::isfinite(v)) throw std::invalid_argument("Tensor: non-finite entry");
    }
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.size() == 1 ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() == 1 ? shape[0] : shape[1]; }
  bool is_scalar() const { return size() == 1; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_extent(const Tensor& other) const {
    return rows() == other.rows() && cols() == other.cols();
  }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

}  // namespace fedgan::ad
