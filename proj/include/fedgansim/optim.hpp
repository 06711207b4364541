#pragma once

#include <cstdint>
#include <vector>

#include "fedgansim/mlp.hpp"

namespace fedgan::gan {

enum class OptimKind { kAdam, kRmsprop };

struct OptimState {
  OptimKind kind = OptimKind::kAdam;
  double learning_rate = 2e-4;
  double beta1 = 0.5;   // Adam
  double beta2 = 0.999; // Adam
  double rho = 0.9;     // RMSprop
  double eps = 1e-8;
  std::vector<double> m;  // first moment (Adam only)
  std::vector<double> v;  // second moment
  std::uint64_t step = 0;

  static OptimState adam(double lr, std::size_t n_params, double beta1 = 0.5,
                         double beta2 = 0.999);
  static OptimState rmsprop(double lr, std::size_t n_params, double rho = 0.9);
};

// Applies one update in place. Returns false (and leaves params and moment
// buffers untouched) when the gradient contains a non-finite entry; the
// caller marks the local step as diverged.
bool optimizer_step(OptimState& state, ParamVector& params, const ParamVector& grads);

}  // namespace fedgan::gan
