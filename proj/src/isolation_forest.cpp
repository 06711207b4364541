#include "fedgansim/isolation_forest.hpp"

#include <cmath>
#include <stdexcept>

#include "fedgansim/rng.hpp"

namespace fedgan::iso {

namespace {
constexpr double kEulerGamma = 0.5772156649;
}

void ForestConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("ForestConfig: need at least one tree");
  if (subsample < 2) throw std::invalid_argument("ForestConfig: subsample must be >= 2");
  if (!(score_threshold > 0.5 && score_threshold < 1.0)) {
    throw std::invalid_argument("ForestConfig: score threshold must lie in (0.5, 1)");
  }
}

double avg_path_norm(std::size_t n) {
  if (n < 2) throw std::invalid_argument("avg_path_norm: n must be >= 2");
  const double m = static_cast<double>(n - 1);
  const double harmonic = std::log(m) + kEulerGamma;
  return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& points;
  std::size_t n_features;
  std::size_t height_limit;
  Rng& rng;
  IsolationTree tree;

  // Builds the subtree over points[indices[begin..end)]; returns node index.
  int build(std::vector<std::size_t>& indices, std::size_t begin, std::size_t end,
            std::size_t depth) {
    const std::size_t count = end - begin;
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    auto make_leaf = [&]() {
      tree.nodes[self].feature = -1;
      tree.nodes[self].size = static_cast<std::uint32_t>(count);
      return self;
    };
    if (count <= 1 || depth >= height_limit) return make_leaf();

    // candidate features: those with spread at this node
    std::vector<int> splittable;
    std::vector<std::pair<double, double>> ranges(n_features);
    for (std::size_t f = 0; f < n_features; ++f) {
      double lo = points[indices[begin]][f], hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        const double v = points[indices[i]][f];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      ranges[f] = {lo, hi};
      if (hi > lo) splittable.push_back(static_cast<int>(f));
    }
    if (splittable.empty()) return make_leaf();  // all duplicates

    const int feature = splittable[rng.uniform_int(splittable.size())];
    const auto [lo, hi] = ranges[static_cast<std::size_t>(feature)];
    const double split = lo + rng.uniform01() * (hi - lo);
    if (!(split > lo && split < hi)) return make_leaf();  // fp-degenerate range

    // partition: < split goes left
    std::size_t mid = begin;
    for (std::size_t i = begin; i < end; ++i) {
      if (points[indices[i]][static_cast<std::size_t>(feature)] < split) {
        std::swap(indices[i], indices[mid]);
        ++mid;
      }
    }

    tree.nodes[self].feature = feature;
    tree.nodes[self].split = split;
    const int left = build(indices, begin, mid, depth + 1);
    const int right = build(indices, mid, end, depth + 1);
    tree.nodes[self].left = left;
    tree.nodes[self].right = right;
    return self;
  }
};

}  // namespace

IsolationForest fit_forest(const std::vector<std::vector<double>>& points,
                           const ForestConfig& cfg) {
  cfg.validate();
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("fit_forest: need at least two points");
  const std::size_t n_features = points.front().size();
  for (const auto& p : points) {
    if (p.size() != n_features) throw std::invalid_argument("fit_forest: ragged points");
    for (double v : p) {
      if (!std::isfinite(v)) throw std::invalid_argument("fit_forest: non-finite feature");
    }
  }

  IsolationForest forest;
  forest.subsample_used = std::min(cfg.subsample, n);
  const std::size_t height_limit = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(forest.subsample_used))));

  forest.trees.reserve(cfg.n_trees);
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(cfg.seed, 0x7265657374ull, t));

    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    if (forest.subsample_used < n) {
      // partial Fisher-Yates: the first subsample_used entries are the draw
      for (std::size_t i = 0; i < forest.subsample_used; ++i) {
        const std::size_t j = i + rng.uniform_int(n - i);
        std::swap(indices[i], indices[j]);
      }
      indices.resize(forest.subsample_used);
    }

    TreeBuilder builder{points, n_features, height_limit, rng, {}};
    builder.build(indices, 0, indices.size(), 0);
    forest.trees.push_back(std::move(builder.tree));
  }
  return forest;
}

double tree_path_length(const IsolationTree& tree, std::span<const double> point) {
  std::size_t depth = 0;
  int node = 0;
  while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const IsoNode& nd = tree.nodes[static_cast<std::size_t>(node)];
    node = point[static_cast<std::size_t>(nd.feature)] < nd.split ? nd.left : nd.right;
    ++depth;
  }
  const IsoNode& leaf = tree.nodes[static_cast<std::size_t>(node)];
  double len = static_cast<double>(depth);
  if (leaf.size > 1) len += avg_path_norm(leaf.size);
  return len;
}

double anomaly_score(const IsolationForest& forest, std::span<const double> point) {
  if (forest.trees.empty()) throw std::invalid_argument("anomaly_score: empty forest");
  double total = 0.0;
  for (const IsolationTree& tree : forest.trees) {
    total += tree_path_length(tree, point);
  }
  const double mean_path = total / static_cast<double>(forest.trees.size());
  return std::pow(2.0, -mean_path / avg_path_norm(forest.subsample_used));
}

}  // namespace fedgan::iso
