#include "fedgansim/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fedgan::gan {

OptimState OptimState::adam(double lr, std::size_t n_params, double beta1, double beta2) {
  OptimState s;
  s.kind = OptimKind::kAdam;
  s.learning_rate = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.m.assign(n_params, 0.0);
  s.v.assign(n_params, 0.0);
  return s;
}

OptimState OptimState::rmsprop(double lr, std::size_t n_params, double rho) {
  OptimState s;
  s.kind = OptimKind::kRmsprop;
  s.learning_rate = lr;
  s.rho = rho;
  s.v.assign(n_params, 0.0);
  return s;
}

bool optimizer_step(OptimState& state, ParamVector& params, const ParamVector& grads) {
  // lr == 0 is a legitimate no-op (moments still advance)
  if (state.learning_rate < 0.0 || !std::isfinite(state.learning_rate)) {
    throw std::invalid_argument("optimizer_step: learning rate must be >= 0");
  }
  if (grads.data.size() != params.data.size() ||
      state.v.size() != params.data.size() ||
      (state.kind == OptimKind::kAdam && state.m.size() != params.data.size())) {
    throw std::invalid_argument("optimizer_step: buffer size mismatch");
  }
  if (!grads.all_finite()) return false;

  state.step += 1;
  const std::size_t n = params.data.size();
  const double lr = state.learning_rate;

  if (state.kind == OptimKind::kAdam) {
    const double b1 = state.beta1, b2 = state.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grads.data[i];
      state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
      state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
      const double mhat = state.m[i] / bias1;
      const double vhat = state.v[i] / bias2;
      params.data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  } else {
    const double rho = state.rho;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grads.data[i];
      state.v[i] = rho * state.v[i] + (1.0 - rho) * g * g;
      params.data[i] -= lr * g / (std::sqrt(state.v[i]) + state.eps);
    }
  }
  return true;
}

}  // namespace fedgan::gan
