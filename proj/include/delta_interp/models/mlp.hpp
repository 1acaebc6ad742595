#pragma once

#include <cmath>
#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/models/linear.hpp"
#include "delta_interp/rng.hpp"
#include "delta_interp/training.hpp"

namespace delta_interp::mlp {

// One tanh hidden layer, softmax output. Inputs are standardized with the
// stored (mean, scale) before the first layer.
struct MlpParams {
  Matrix hidden;  // H x (d+1), bias last
  Matrix output;  // K x (H+1), bias last
  std::vector<double> mean;
  std::vector<double> scale;

  void forward(std::span<const double> x, std::vector<double>& h, std::span<double> logits) const {
    const std::size_t d = mean.size(), H = hidden.rows();
    h.resize(H);
    for (std::size_t u = 0; u < H; ++u) {
      auto w = hidden.row(u);
      double a = w[d];
      for (std::size_t j = 0; j < d; ++j) a += w[j] * (x[j] - mean[j]) / scale[j];
      h[u] = std::tanh(a);
    }
    for (std::size_t k = 0; k < output.rows(); ++k) {
      auto w = output.row(k);
      logits[k] = dot(w.first(H), h) + w[H];
    }
  }

  void confidence(std::span<const double> x, std::span<double> out) const {
    std::vector<double> h;
    forward(x, h, out);
    linear::softmax_inplace(out);
  }
};

struct FitSettings {
  int hidden_units = 16;
  double learning_rate = 0.5;
  int max_iter = 3000;
  double tol = 1e-7;
  double l2 = 1e-4;
};

struct MlpFit {
  MlpParams params;
  TrainingInfo info;
};

/// Weighted cross-entropy (normalized by the weight sum) by full-batch
/// gradient descent. Weights start uniform in +-1/sqrt(fan_in).
inline MlpFit fit(const Dataset& data, const FitSettings& cfg, Rng rng) {
  const std::size_t n = data.size(), d = data.dim(), H = static_cast<std::size_t>(cfg.hidden_units);
  const auto K = static_cast<std::size_t>(data.n_labels());
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) wsum += data.weight(i);
  if (!(wsum > 0.0)) throw TrainingError("mlp1: all-zero weights");

  MlpFit out;
  auto& p = out.params;
  p.mean.assign(d, 0.0);
  p.scale.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) p.mean[j] += data.weight(i) * data.x(i)[j] / wsum;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data.x(i)[j] - p.mean[j];
      p.scale[j] += data.weight(i) * c * c / wsum;
    }
  for (auto& s : p.scale) {
    s = std::sqrt(s);
    if (!(s > 1e-12)) s = 1.0;
  }

  p.hidden = Matrix(H, d + 1);
  p.output = Matrix(K, H + 1);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(d, 1)));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(H));
  for (double& v : p.hidden.data()) v = rng.uniform(-b1, b1);
  for (double& v : p.output.data()) v = rng.uniform(-b2, b2);

  Matrix g_hidden(H, d + 1), g_output(K, H + 1);
  std::vector<double> h, logits(K), delta_h(H), zx(d);
  out.info.converged = false;
  for (int it = 0; it < cfg.max_iter; ++it) {
    std::fill(g_hidden.data().begin(), g_hidden.data().end(), 0.0);
    std::fill(g_output.data().begin(), g_output.data().end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = data.weight(i) / wsum;
      if (w == 0.0) continue;
      auto x = data.x(i);
      p.forward(x, h, logits);
      const double lse = linear::log_sum_exp(logits);
      const auto y = static_cast<std::size_t>(data.y(i));
      loss += w * (lse - logits[y]);
      std::fill(delta_h.begin(), delta_h.end(), 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const double g = w * (std::exp(logits[k] - lse) - (k == y ? 1.0 : 0.0));
        auto go = g_output.row(k);
        auto wo = p.output.row(k);
        for (std::size_t u = 0; u < H; ++u) {
          go[u] += g * h[u];
          delta_h[u] += g * wo[u];
        }
        go[H] += g;
      }
      for (std::size_t j = 0; j < d; ++j) zx[j] = (x[j] - p.mean[j]) / p.scale[j];
      for (std::size_t u = 0; u < H; ++u) {
        const double g = delta_h[u] * (1.0 - h[u] * h[u]);
        auto gh = g_hidden.row(u);
        for (std::size_t j = 0; j < d; ++j) gh[j] += g * zx[j];
        gh[d] += g;
      }
    }
    double norm2 = 0.0;
    auto regularize = [&](Matrix& g, const Matrix& wts) {
      const std::size_t cols = wts.cols();
      for (std::size_t r = 0; r < wts.rows(); ++r)
        for (std::size_t c = 0; c + 1 < cols; ++c) {
          loss += 0.5 * cfg.l2 * wts(r, c) * wts(r, c);
          g(r, c) += cfg.l2 * wts(r, c);
        }
      for (double v : g.data()) norm2 += v * v;
    };
    regularize(g_hidden, p.hidden);
    regularize(g_output, p.output);
    out.info.objective = loss;
    out.info.grad_norm = std::sqrt(norm2);
    out.info.iterations = it;
    if (!std::isfinite(loss)) throw TrainingError("mlp1: objective diverged");
    if (out.info.grad_norm <= cfg.tol) {
      out.info.converged = true;
      break;
    }
    for (std::size_t q = 0; q < p.hidden.data().size(); ++q) p.hidden.data()[q] -= cfg.learning_rate * g_hidden.data()[q];
    for (std::size_t q = 0; q < p.output.data().size(); ++q) p.output.data()[q] -= cfg.learning_rate * g_output.data()[q];
  }
  if (!out.info.converged) out.info.iterations = cfg.max_iter;
  return out;
}

}  // namespace delta_interp::mlp
