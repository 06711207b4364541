#include "fedgansim/detection.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedgan::iso {

DetectionState DetectionState::init(std::size_t n_clients, std::size_t warmup,
                                    double decay, DecayMode mode) {
  if (n_clients == 0) throw std::invalid_argument("DetectionState: no clients");
  if (!(decay > 0.0 && decay < 1.0)) {
    throw std::invalid_argument("DetectionState: decay must lie in (0, 1)");
  }
  DetectionState s;
  s.weights.assign(n_clients, 1.0 / static_cast<double>(n_clients));
  s.counters.assign(n_clients, 0);
  s.warmup_rounds = warmup;
  s.decay = decay;
  s.mode = mode;
  return s;
}

std::vector<std::size_t> detect_outliers(const std::vector<double>& losses,
                                         const ForestConfig& cfg,
                                         std::size_t n_clients) {
  if (losses.size() != n_clients || n_clients < 2) {
    throw std::invalid_argument("detect_outliers: need one loss per client, N >= 2");
  }

  std::vector<std::vector<double>> points;
  points.reserve(n_clients);
  for (double l : losses) points.push_back({l});

  IsolationForest forest = fit_forest(points, cfg);
  std::vector<std::size_t> outliers;
  for (std::size_t i = 0; i < n_clients; ++i) {
    if (anomaly_score(forest, points[i]) > cfg.score_threshold) outliers.push_back(i);
  }

  // Validity gate: 0 < |O| < N/2. An empty or too-large set means detection
  // is skipped this round (honest-majority assumption).
  if (outliers.empty() || 2 * outliers.size() >= n_clients) return {};
  return outliers;
}

void update_weights(DetectionState& state, const std::vector<std::size_t>& outliers) {
  const std::size_t n = state.weights.size();
  for (std::size_t i : outliers) {
    if (i >= n) throw std::out_of_range("update_weights: client id out of range");
    state.counters[i] += 1;
    if (state.mode == DecayMode::kCompound) {
      state.weights[i] *= std::pow(state.decay, static_cast<double>(state.counters[i]));
    } else {
      state.weights[i] = (1.0 / static_cast<double>(n)) *
                         std::pow(state.decay, static_cast<double>(state.counters[i]));
    }
    // long runs of detections underflow the compound product; keep w_i > 0
    state.weights[i] = std::max(state.weights[i], std::numeric_limits<double>::min());
  }
}

}  // namespace fedgan::iso
