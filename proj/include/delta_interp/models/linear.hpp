#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/margin.hpp"
#include "delta_interp/training.hpp"

namespace delta_interp::linear {

// Per-label scores s_k(x) = w_k . x + b_k. Row k of `weights` holds
// (w_k, b_k) with the bias in the last column.
struct LinearParams {
  Matrix weights;
  double hinge_smoothing = 0.5;
  double pseudo_c = 1.0;

  std::size_t n_labels() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols() - 1; }

  void scores(std::span<const double> x, std::span<double> out) const noexcept {
    const std::size_t d = dim();
    for (std::size_t k = 0; k < n_labels(); ++k) {
      auto w = weights.row(k);
      out[k] = dot(w.first(d), x) + w[d];
    }
  }
};

enum class Loss { softmax_nll, ovr_hinge };

inline void softmax_inplace(std::span<double> v) noexcept {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& e : v) s += (e = std::exp(e - m));
  for (double& e : v) e /= s;
}

inline double log_sum_exp(std::span<const double> v) noexcept {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

/// Quadratically smoothed hinge: equals max(0, 1 - z) - h/2 below 1 - h,
/// zero above 1, and a quadratic bridge in between. h = 0 is the plain hinge.
inline double hinge(double z, double h) noexcept {
  if (z >= 1.0) return 0.0;
  if (h <= 0.0) return 1.0 - z;
  if (z <= 1.0 - h) return 1.0 - z - 0.5 * h;
  return (1.0 - z) * (1.0 - z) / (2.0 * h);
}

inline double hinge_deriv(double z, double h) noexcept {
  if (z >= 1.0) return 0.0;
  if (h <= 0.0 || z <= 1.0 - h) return -1.0;
  return -(1.0 - z) / h;
}

/// One-vs-rest risk r(y, x) = sum_k hinge(t_k s_k) with t_k = +1 for k == y.
inline void ovr_risks(std::span<const double> scores, double h, std::span<double> out) noexcept {
  const std::size_t K = scores.size();
  double all_negative = 0.0;
  for (double s : scores) all_negative += hinge(-s, h);
  for (std::size_t y = 0; y < K; ++y) out[y] = all_negative - hinge(-scores[y], h) + hinge(scores[y], h);
}

/// Weighted empirical objective over parameters theta (flattened K x (d+1),
/// row-major). Rows contribute row_scale[r] * loss_r; the optional margin term
/// contributes margin_scale * f(.) per point; l2/2 * |W|^2 excludes biases.
class Objective {
 public:
  Objective(const Matrix& x, std::span<const Label> y, std::vector<double> row_scale, int n_labels, Loss loss,
            double l2, double hinge_smoothing, const MarginTerm* margin = nullptr, double margin_scale = 0.0)
      : x_(x),
        y_(y),
        row_scale_(std::move(row_scale)),
        K_(static_cast<std::size_t>(n_labels)),
        loss_(loss),
        l2_(l2),
        h_(hinge_smoothing),
        margin_(margin && margin->kind != MarginTerm::Kind::none ? margin : nullptr),
        margin_scale_(margin_scale) {
    if (margin_ && K_ != 2) throw InvalidArgument("margin penalty requires a binary model");
    if (margin_ && margin_->points.cols() != x.cols()) throw DimensionMismatch("margin points width != features");
  }

  std::size_t n_params() const noexcept { return K_ * (x_.cols() + 1); }

  double value(std::span<const double> theta) const { return evaluate(theta, {}); }

  double value_and_gradient(std::span<const double> theta, std::span<double> grad) const {
    return evaluate(theta, grad);
  }

 private:
  void scores(std::span<const double> theta, std::span<const double> x, std::span<double> out) const noexcept {
    const std::size_t d = x_.cols();
    for (std::size_t k = 0; k < K_; ++k) out[k] = dot(theta.subspan(k * (d + 1), d), x) + theta[k * (d + 1) + d];
  }

  // Accumulates coef * d(score_k)/d(theta) into grad for every label k.
  void push_score_grad(std::span<const double> x, std::span<const double> coef, std::span<double> grad) const noexcept {
    const std::size_t d = x_.cols();
    for (std::size_t k = 0; k < K_; ++k) {
      if (coef[k] == 0.0) continue;
      double* g = grad.data() + k * (d + 1);
      for (std::size_t j = 0; j < d; ++j) g[j] += coef[k] * x[j];
      g[d] += coef[k];
    }
  }

  double evaluate(std::span<const double> theta, std::span<double> grad) const {
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> s(K_), coef(K_);
    double total = 0.0;

    for (std::size_t r = 0; r < x_.rows(); ++r) {
      const double w = row_scale_[r];
      if (w == 0.0) continue;
      auto x = x_.row(r);
      scores(theta, x, s);
      const auto y = static_cast<std::size_t>(y_[r]);
      if (loss_ == Loss::softmax_nll) {
        const double lse = log_sum_exp(s);
        total += w * (lse - s[y]);
        if (want_grad) {
          for (std::size_t k = 0; k < K_; ++k) coef[k] = w * std::exp(s[k] - lse);
          coef[y] -= w;
        }
      } else {
        for (std::size_t k = 0; k < K_; ++k) {
          const double t = k == y ? 1.0 : -1.0;
          total += w * hinge(t * s[k], h_);
          if (want_grad) coef[k] = w * t * hinge_deriv(t * s[k], h_);
        }
      }
      if (want_grad) push_score_grad(x, coef, grad);
    }

    if (margin_) total += margin_value(theta, grad, s, coef);

    const std::size_t d = x_.cols();
    for (std::size_t k = 0; k < K_; ++k)
      for (std::size_t j = 0; j < d; ++j) {
        const double t = theta[k * (d + 1) + j];
        total += 0.5 * l2_ * t * t;
        if (want_grad) grad[k * (d + 1) + j] += l2_ * t;
      }
    return total;
  }

  double margin_value(std::span<const double> theta, std::span<double> grad, std::vector<double>& s,
                      std::vector<double>& coef) const {
    const bool want_grad = !grad.empty();
    const double sc = margin_scale_;
    double total = 0.0;
    for (std::size_t r = 0; r < margin_->points.rows(); ++r) {
      auto x = margin_->points.row(r);
      scores(theta, x, s);
      if (margin_->kind == MarginTerm::Kind::mle) {
        // log p(1|x) - log p(0|x) is the score difference under softmax.
        const double z = s[1] - s[0];
        total += sc * margin_f_mle(std::abs(z));
        if (want_grad) {
          const double g = sc * margin_f_mle_deriv(std::abs(z)) * sign(z);
          coef[1] = g;
          coef[0] = -g;
        }
      } else {
        // Label 1 plays +1 and label 0 plays -1.
        const double r1 = hinge(s[1], h_) + hinge(-s[0], h_);
        const double r2 = hinge(-s[1], h_) + hinge(s[0], h_);
        const double delta = r1 - r2;
        const double u = margin_->c * std::abs(delta);
        total += sc * margin_f_erm(u);
        if (want_grad) {
          const double g = sc * margin_f_erm_deriv(u) * margin_->c * sign(delta);
          coef[1] = g * (hinge_deriv(s[1], h_) + hinge_deriv(-s[1], h_));
          coef[0] = -g * (hinge_deriv(-s[0], h_) + hinge_deriv(s[0], h_));
        }
      }
      if (want_grad) push_score_grad(x, coef, grad);
    }
    return total;
  }

  const Matrix& x_;
  std::span<const Label> y_;
  std::vector<double> row_scale_;
  std::size_t K_;
  Loss loss_;
  double l2_;
  double h_;
  const MarginTerm* margin_;
  double margin_scale_;
};

struct FitSettings {
  Loss loss = Loss::softmax_nll;
  double l2 = 1e-3;
  double hinge_smoothing = 0.5;
  double learning_rate = 0.0;  // 0: derived from a curvature bound
  int max_iter = 5000;
  double tol = 1e-7;
};

struct LinearFit {
  LinearParams params;
  TrainingInfo info;
};

/// Full-batch gradient descent with a fixed step on standardized features.
/// Standardization uses weighted moments so that duplicating a row with half
/// its weight, or rescaling all weights, leaves the problem unchanged.
inline LinearFit fit(const Dataset& data, const FitSettings& cfg, const TrainOptions& opts = {}) {
  const std::size_t n = data.size(), d = data.dim();
  const int K = data.n_labels();
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) wsum += data.weight(i);
  if (!(wsum > 0.0)) throw TrainingError("linear: all-zero weights");

  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += data.weight(i) * data.x(i)[j];
  for (auto& m : mu) m /= wsum;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data.x(i)[j] - mu[j];
      sd[j] += data.weight(i) * c * c;
    }
  for (auto& s : sd) {
    s = std::sqrt(s / wsum);
    if (!(s > 1e-12)) s = 1.0;
  }
  auto standardize = [&](const Matrix& m) {
    Matrix z(m.rows(), d);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) z(i, j) = (m(i, j) - mu[j]) / sd[j];
    return z;
  };
  const Matrix z = standardize(data.features());

  const double normalizer = opts.data_normalizer > 0.0 ? opts.data_normalizer : wsum;
  std::vector<double> row_scale(n);
  double mean_sq_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    row_scale[i] = data.weight(i) / normalizer;
    mean_sq_norm += data.weight(i) / wsum * (dot(z.row(i), z.row(i)) + 1.0);
  }

  MarginTerm margin;
  double margin_scale = 0.0;
  if (opts.margin.kind != MarginTerm::Kind::none) {
    margin.kind = opts.margin.kind;
    margin.c = opts.margin.c;
    margin.points = standardize(opts.margin.points);
    margin_scale = margin.points.rows() ? 1.0 / static_cast<double>(margin.points.rows()) : 0.0;
  }

  Objective objective(z, data.labels(), row_scale, K, cfg.loss, cfg.l2, cfg.hinge_smoothing, &margin, margin_scale);

  double step = cfg.learning_rate;
  if (step <= 0.0) {
    const double data_scale = wsum / normalizer;
    double L = cfg.loss == Loss::softmax_nll ? 0.5 * mean_sq_norm * data_scale
                                             : mean_sq_norm * data_scale / std::max(cfg.hinge_smoothing, 1e-12);
    if (margin.kind == MarginTerm::Kind::mle) L += 16.0 * mean_sq_norm;
    if (margin.kind == MarginTerm::Kind::erm)
      L += (33.0 * margin.c * margin.c + 8.0 * margin.c / std::max(cfg.hinge_smoothing, 1e-12)) * mean_sq_norm;
    step = 1.0 / (L + cfg.l2);
  }

  std::vector<double> theta(objective.n_params(), 0.0), grad(theta.size());
  TrainingInfo info;
  info.converged = false;
  for (int it = 0; it < cfg.max_iter; ++it) {
    info.objective = objective.value_and_gradient(theta, grad);
    info.grad_norm = std::sqrt(dot(grad, grad));
    info.iterations = it;
    if (!std::isfinite(info.objective)) throw TrainingError("linear: objective diverged");
    if (info.grad_norm <= cfg.tol) {
      info.converged = true;
      break;
    }
    for (std::size_t p = 0; p < theta.size(); ++p) theta[p] -= step * grad[p];
  }
  if (!info.converged) {
    info.objective = objective.value_and_gradient(theta, grad);
    info.grad_norm = std::sqrt(dot(grad, grad));
    info.iterations = cfg.max_iter;
  }

  // Map back to raw feature space.
  LinearFit out;
  out.info = info;
  out.params.hinge_smoothing = cfg.hinge_smoothing;
  out.params.weights = Matrix(static_cast<std::size_t>(K), d + 1);
  for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k) {
    double bias = theta[k * (d + 1) + d];
    for (std::size_t j = 0; j < d; ++j) {
      const double w = theta[k * (d + 1) + j] / sd[j];
      out.params.weights(k, j) = w;
      bias -= w * mu[j];
    }
    out.params.weights(k, d) = bias;
  }
  return out;
}

}  // namespace delta_interp::linear
