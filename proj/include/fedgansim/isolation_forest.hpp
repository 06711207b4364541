#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fedgan::iso {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t subsample = 256;     // capped at the point count when fitting
  double score_threshold = 0.6;    // anomaly score above this flags a point
  std::uint64_t seed = 0;

  void validate() const;
};

// Binary partition tree node. Internal nodes carry (feature, split); leaves
// carry the sample size at termination (feature == -1).
struct IsoNode {
  int feature = -1;
  double split = 0.0;
  int left = -1;
  int right = -1;
  std::uint32_t size = 0;
};

struct IsolationTree {
  std::vector<IsoNode> nodes;  // nodes[0] is the root
};

struct IsolationForest {
  std::vector<IsolationTree> trees;
  std::size_t subsample_used = 0;  // actual per-tree sample size
};

// Average unsuccessful-search path length c(n) = 2 H(n-1) - 2 (n-1)/n with
// H(i) ~ ln(i) + Euler-Mascheroni; normalizes path lengths in the anomaly
// score. Requires n >= 2.
double avg_path_norm(std::size_t n);

// Fits n_trees trees, each on a seeded subsample of min(subsample, n)
// points: uniform random split feature among the splittable ones, uniform
// split value strictly inside (min, max), growth stopped at singletons,
// duplicates, or the ceil(log2(subsample)) height limit.
IsolationForest fit_forest(const std::vector<std::vector<double>>& points,
                           const ForestConfig& cfg);

// 2^(-E[path length]/c(subsample)); deterministic, in (0, 1). External
// nodes holding more than one point extend the path by avg_path_norm(size).
double anomaly_score(const IsolationForest& forest, std::span<const double> point);

// Per-tree path length of a point (exposed so tests can recompute scores
// independently of the averaging in anomaly_score).
double tree_path_length(const IsolationTree& tree, std::span<const double> point);

}  // namespace fedgan::iso
