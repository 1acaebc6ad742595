#pragma once

#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/models.hpp"

namespace test_helpers {

namespace di = delta_interp;

inline di::Dataset make_dataset(std::vector<std::vector<double>> rows, std::vector<di::Label> labels, int K = 2) {
  di::Matrix x(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
  return di::Dataset(std::move(x), std::move(labels), K);
}

/// Balanced binary data on a line: label i % 2.
inline di::Dataset balanced_binary(std::size_t n) {
  di::Matrix x(n, 1);
  std::vector<di::Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = static_cast<di::Label>(i % 2);
  }
  return di::Dataset(std::move(x), std::move(y), 2);
}

/// A model predicting a constant label: a one-leaf tree whose counts favour it.
inline di::TrainedModel constant_model(di::Label label, int K, std::size_t dim) {
  di::TrainedModel m;
  m.spec = di::ModelSpec(di::Family::decision_tree);
  m.n_labels = K;
  m.feature_dim = dim;
  di::tree::TreeParams t;
  di::tree::Node leaf;
  leaf.counts.assign(static_cast<std::size_t>(K), 0.0);
  leaf.counts[static_cast<std::size_t>(label)] = 10.0;
  t.nodes.push_back(leaf);
  m.params = t;
  return m;
}

/// A one-leaf tree with equal counts: confidence 1/K everywhere.
inline di::TrainedModel uniform_model(int K, std::size_t dim) {
  auto m = constant_model(0, K, dim);
  std::get<di::tree::TreeParams>(m.params).nodes[0].counts.assign(static_cast<std::size_t>(K), 0.0);
  return m;
}

}  // namespace test_helpers
