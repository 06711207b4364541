#pragma once

#include <cstdint>
#include <vector>

#include "fedgansim/isolation_forest.hpp"

namespace fedgan::iso {

enum class DecayMode {
  kCompound,  // w_i *= d^(c_i), exponents accumulate across detections
  kAbsolute,  // w_i = (1/N) * d^(c_i)
};

// Server-side ledger of the global defense: per-client aggregation weight
// and cumulative detection counter, plus the warmup length and decay rate.
struct DetectionState {
  std::vector<double> weights;    // w_i, init 1/N
  std::vector<std::uint64_t> counters;  // c_i, init 0
  std::size_t warmup_rounds = 10;       // m
  double decay = 0.9;                    // d in (0, 1)
  DecayMode mode = DecayMode::kCompound;

  static DetectionState init(std::size_t n_clients, std::size_t warmup, double decay,
                             DecayMode mode = DecayMode::kCompound);
};

// Isolation-Forest outlier set over one scalar loss per client, with the
// validity gate: the result is kept only when 0 < |O| < N/2, otherwise the
// empty set is returned and the round performs no decay.
std::vector<std::size_t> detect_outliers(const std::vector<double>& losses,
                                         const ForestConfig& cfg, std::size_t n_clients);

// For each detected client: increment its counter, then multiply its weight
// by decay^counter (compound mode). Weights of undetected clients are never
// touched and no renormalization happens here; aggregation normalizes.
void update_weights(DetectionState& state, const std::vector<std::size_t>& outliers);

}  // namespace fedgan::iso
