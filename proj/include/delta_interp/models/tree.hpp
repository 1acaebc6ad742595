#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/rng.hpp"

namespace delta_interp::tree {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Effective label counts at a leaf: the leaf's row count distributed in
  // proportion to the per-label weight mass.
  std::vector<double> counts;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct TreeParams {
  std::vector<Node> nodes;

  const Node& leaf_for(std::span<const double> x) const noexcept {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const Node& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)];
  }

  /// Laplace-smoothed leaf frequencies (count_y + 1) / (n_leaf + K).
  void confidence(std::span<const double> x, std::span<double> out) const noexcept {
    const auto& c = leaf_for(x).counts;
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) out[k] = (c[k] + 1.0) / (total + static_cast<double>(c.size()));
  }

  Label predict(std::span<const double> x) const noexcept { return argmax(leaf_for(x).counts); }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes[i].is_leaf()) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }
};

struct GrowSettings {
  int max_depth = 6;
  int min_samples_leaf = 1;
  int max_features = 0;  // 0: all features
};

namespace detail {

inline double gini_mass(std::span<const double> mass, double total) noexcept {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double m : mass) s += m * m;
  return total - s / total;  // total * (1 - sum p^2)
}

class Grower {
 public:
  Grower(const Matrix& x, std::span<const Label> y, std::span<const double> w, int K, GrowSettings s, Rng* rng)
      : x_(x), y_(y), w_(w), K_(static_cast<std::size_t>(K)), s_(s), rng_(rng) {}

  TreeParams grow(std::vector<std::size_t> rows) {
    TreeParams t;
    build(t, std::move(rows), 0);
    return t;
  }

 private:
  int build(TreeParams& t, std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();

    std::vector<double> mass(K_, 0.0);
    double total = 0.0;
    for (auto r : rows) {
      mass[static_cast<std::size_t>(y_[r])] += w_[r];
      total += w_[r];
    }
    const auto min_leaf = static_cast<std::size_t>(s_.min_samples_leaf);
    const bool pure = std::count_if(mass.begin(), mass.end(), [](double m) { return m > 0.0; }) <= 1;

    Split best;
    if (depth < s_.max_depth && !pure && rows.size() >= 2 * min_leaf) best = find_split(rows, mass, total);

    if (best.feature < 0) {
      auto& leaf = t.nodes[static_cast<std::size_t>(id)];
      leaf.counts.assign(K_, 0.0);
      const auto n = static_cast<double>(rows.size());
      for (std::size_t k = 0; k < K_; ++k) leaf.counts[k] = total > 0.0 ? n * mass[k] / total : 0.0;
      if (!(total > 0.0))
        for (auto r : rows) leaf.counts[static_cast<std::size_t>(y_[r])] += 1.0;
      return id;
    }

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(t, std::move(left), depth + 1);
    const int r = build(t, std::move(right), depth + 1);
    auto& node = t.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> f(x_.cols());
    std::iota(f.begin(), f.end(), std::size_t{0});
    if (rng_ && s_.max_features > 0 && static_cast<std::size_t>(s_.max_features) < f.size()) {
      rng_->shuffle(std::span<std::size_t>(f));
      f.resize(static_cast<std::size_t>(s_.max_features));
      std::sort(f.begin(), f.end());
    }
    return f;
  }

  Split find_split(const std::vector<std::size_t>& rows, const std::vector<double>& mass, double total) {
    Split best;
    best.impurity = gini_mass(mass, total) - 1e-12;
    const auto min_leaf = static_cast<std::size_t>(s_.min_samples_leaf);
    std::vector<std::size_t> order(rows);
    std::vector<double> left(K_);
    for (auto f : candidate_features()) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = x_(a, f), vb = x_(b, f);
        return va < vb || (va == vb && a < b);
      });
      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto r = order[i];
        left[static_cast<std::size_t>(y_[r])] += w_[r];
        left_total += w_[r];
        const double v = x_(r, f), next = x_(order[i + 1], f);
        if (v == next) continue;
        if (i + 1 < min_leaf || order.size() - i - 1 < min_leaf) continue;
        std::vector<double> right(K_);
        for (std::size_t k = 0; k < K_; ++k) right[k] = mass[k] - left[k];
        const double imp = gini_mass(left, left_total) + gini_mass(right, total - left_total);
        if (imp < best.impurity) {
          best.impurity = imp;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (v + next);
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const Label> y_;
  std::span<const double> w_;
  std::size_t K_;
  GrowSettings s_;
  Rng* rng_;
};

inline std::vector<double> row_weights(const Dataset& data) {
  std::vector<double> w(data.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = data.weight(i);
  return w;
}

}  // namespace detail

/// CART with weighted Gini impurity; splits at midpoints between distinct
/// sorted values.
inline TreeParams fit_tree(const Dataset& data, const GrowSettings& s, Rng* rng = nullptr) {
  const auto w = detail::row_weights(data);
  if (std::none_of(w.begin(), w.end(), [](double v) { return v > 0.0; }))
    throw TrainingError("decision_tree: all-zero weights");
  detail::Grower g(data.features(), data.labels(), w, data.n_labels(), s, rng);
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return g.grow(std::move(rows));
}

struct ForestParams {
  std::vector<TreeParams> trees;
  int n_labels = 2;

  /// Smoothed vote fractions (votes_y + 1) / (T + K).
  void confidence(std::span<const double> x, std::span<double> out) const noexcept {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& t : trees) out[static_cast<std::size_t>(t.predict(x))] += 1.0;
    const double denom = static_cast<double>(trees.size()) + n_labels;
    for (auto& v : out) v = (v + 1.0) / denom;
  }
};

inline ForestParams fit_forest(const Dataset& data, int n_trees, GrowSettings s, Rng rng) {
  const auto w = detail::row_weights(data);
  if (std::none_of(w.begin(), w.end(), [](double v) { return v > 0.0; }))
    throw TrainingError("random_forest: all-zero weights");
  if (s.max_features <= 0)
    s.max_features = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.dim()))));
  ForestParams f;
  f.n_labels = data.n_labels();
  const std::size_t n = data.size();
  for (int t = 0; t < n_trees; ++t) {
    Rng tree_rng = rng.derive(static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = static_cast<std::size_t>(tree_rng.below(n));
    std::sort(rows.begin(), rows.end());
    detail::Grower g(data.features(), data.labels(), w, data.n_labels(), s, &tree_rng);
    f.trees.push_back(g.grow(std::move(rows)));
  }
  return f;
}

}  // namespace delta_interp::tree
