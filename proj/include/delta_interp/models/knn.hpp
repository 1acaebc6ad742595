#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "delta_interp/dataset.hpp"

namespace delta_interp::knn {

// Stored training set; neighbors by Euclidean distance, ties toward the lower
// training row index.
struct KnnParams {
  Matrix points;
  std::vector<Label> labels;
  std::vector<double> weights;
  int k = 5;
  int n_labels = 2;

  std::vector<std::size_t> neighbors(std::span<const double> x) const {
    const std::size_t n = points.rows();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      auto p = points.row(i);
      for (std::size_t j = 0; j < p.size(); ++j) s += (p[j] - x[j]) * (p[j] - x[j]);
      dist[i] = {s, i};
    }
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::vector<std::size_t> out(kk);
    for (std::size_t i = 0; i < kk; ++i) out[i] = dist[i].second;
    return out;
  }

  /// (count_y + 1) / (k + K). With non-uniform stored weights the k votes are
  /// redistributed in proportion to each label's weight mass.
  void confidence(std::span<const double> x, std::span<double> out) const {
    const auto nb = neighbors(x);
    std::vector<double> raw(static_cast<std::size_t>(n_labels), 0.0), mass(raw.size(), 0.0);
    double wsum = 0.0;
    for (auto i : nb) {
      raw[static_cast<std::size_t>(labels[i])] += 1.0;
      mass[static_cast<std::size_t>(labels[i])] += weights[i];
      wsum += weights[i];
    }
    const bool uniform = std::all_of(nb.begin(), nb.end(), [&](std::size_t i) { return weights[i] == weights[nb[0]]; });
    const auto kk = static_cast<double>(nb.size());
    for (std::size_t y = 0; y < raw.size(); ++y) {
      const double count = (uniform || !(wsum > 0.0)) ? raw[y] : kk * mass[y] / wsum;
      out[y] = (count + 1.0) / (kk + n_labels);
    }
  }
};

inline KnnParams fit(const Dataset& data, int k) {
  KnnParams p;
  p.points = data.features();
  p.labels = data.labels();
  p.weights.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) p.weights[i] = data.weight(i);
  if (std::none_of(p.weights.begin(), p.weights.end(), [](double w) { return w > 0.0; }))
    throw TrainingError("knn: all-zero weights");
  p.k = k;
  p.n_labels = data.n_labels();
  return p;
}

}  // namespace delta_interp::knn
