#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "delta_interp/json_io.hpp"
#include "delta_interp/margin.hpp"
#include "delta_interp/models.hpp"
#include "delta_interp/rng.hpp"

// Binary conventions: label 1 is "+1" and label 0 is "-1". Risks are passed as
// r1 = r(+1, x) and r2 = r(-1, x); confidences as q = p(+1 | x).

namespace delta_interp::bounds {

/// An enumerable input distribution with the complex model's conditional
/// label distribution at every point.
struct FiniteDomain {
  Matrix points;
  std::vector<double> px;
  std::vector<double> cm_plus;  // p_CM(+1 | x)

  std::size_t size() const noexcept { return px.size(); }
  double cm_minus(std::size_t i) const noexcept { return 1.0 - cm_plus[i]; }

  void validate() const {
    if (px.empty()) throw InvalidArgument("finite domain: no points");
    if (points.rows() != px.size() || cm_plus.size() != px.size())
      throw DimensionMismatch("finite domain: points, px and cm_plus lengths differ");
    double s = 0.0;
    for (double p : px) {
      if (!(p >= 0.0)) throw InvalidArgument("finite domain: negative probability");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("finite domain: px does not sum to 1");
    for (double q : cm_plus)
      if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("finite domain: p_CM outside [0, 1]");
  }
};

namespace detail {

inline void check_len(const FiniteDomain& d, std::size_t a, std::size_t b, const char* who) {
  if (a != d.size() || b != d.size()) throw DimensionMismatch(std::string(who) + ": per-point vectors must match the domain");
}

inline void check_risks(std::span<const double> r, const char* who) {
  for (double v : r)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(who) + ": risks must lie in [0, 1]");
}

inline void check_conf(std::span<const double> q) {
  for (double v : q)
    if (!(v >= 1e-12 && v <= 1.0 - 1e-12))
      throw InvalidArgument("mle_rhs: confidences must lie in [1e-12, 1 - 1e-12]; clamp before calling");
}

}  // namespace detail

/// Error probability under D_CM of a binary model, by enumeration.
inline double exact_error(const FiniteDomain& d, const TrainedModel& tm) {
  if (tm.n_labels != 2) throw InvalidArgument("exact_error: binary models only");
  double e = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Label y = predict(tm, d.points.row(i));
    e += d.px[i] * (y == 1 ? d.cm_minus(i) : d.cm_plus[i]);
  }
  return e;
}

/// E_{D_CM}[1{p_TM(y|x) <= 1/2}] for confidences q = p_TM(+1|x).
inline double exact_error_conf(const FiniteDomain& d, std::span<const double> q) {
  detail::check_len(d, q.size(), q.size(), "exact_error");
  double e = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    e += d.px[i] * ((q[i] <= 0.5 ? d.cm_plus[i] : 0.0) + (1.0 - q[i] <= 0.5 ? d.cm_minus(i) : 0.0));
  return e;
}

/// Error of the risk classifier argmin_y r(y, x). At a tie r1 == r2 it
/// predicts y'(x) = argmax_y p_CM(y|x) (label -1 when p_CM is also tied).
inline double exact_error_risk(const FiniteDomain& d, std::span<const double> r1, std::span<const double> r2) {
  detail::check_len(d, r1.size(), r2.size(), "exact_error");
  double e = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    bool plus;
    if (r1[i] != r2[i])
      plus = r1[i] < r2[i];
    else
      plus = d.cm_plus[i] > 0.5;
    e += d.px[i] * (plus ? d.cm_minus(i) : d.cm_plus[i]);
  }
  return e;
}

/// E_p[c p+ r1 + c p- r2 + log(1 + e^{-c|r1-r2|}) + 2 e^{-2c|r1-r2|}].
/// The bound needs risks in [0, 1]; `unit_risks = false` evaluates the
/// expression for arbitrary non-negative risks (training objectives).
inline double erm_a_rhs(const FiniteDomain& d, std::span<const double> r1, std::span<const double> r2, double c,
                        bool unit_risks = true) {
  detail::check_len(d, r1.size(), r2.size(), "erm_a_rhs");
  if (unit_risks) {
    detail::check_risks(r1, "erm_a_rhs");
    detail::check_risks(r2, "erm_a_rhs");
  }
  if (!(c > 0.0)) throw InvalidArgument("erm_a_rhs: c must be > 0");
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    s += d.px[i] * (c * d.cm_plus[i] * r1[i] + c * d.cm_minus(i) * r2[i] + margin_f_erm(c * std::abs(r1[i] - r2[i])));
  return s;
}

/// E_p[-p+ log q+ - p- log q- + 2 e^{-2|log q- - log q+|}].
inline double mle_rhs(const FiniteDomain& d, std::span<const double> q) {
  detail::check_len(d, q.size(), q.size(), "mle_rhs");
  detail::check_conf(q);
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double lp = std::log(q[i]), lm = std::log1p(-q[i]);
    s += d.px[i] * (-d.cm_plus[i] * lp - d.cm_minus(i) * lm + margin_f_mle(std::abs(lm - lp)));
  }
  return s;
}

struct IdentitySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Both sides of error = E_p[2|1/2 - p'| 1{r(y') > r(-y')} + 1/2 - |1/2 - p'|]
/// with p' = p_CM(y'|x).
inline IdentitySides erm_b_identity(const FiniteDomain& d, std::span<const double> r1, std::span<const double> r2) {
  IdentitySides out;
  out.lhs = exact_error_risk(d, r1, r2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool yp_plus = d.cm_plus[i] > 0.5;
    const double pp = yp_plus ? d.cm_plus[i] : d.cm_minus(i);
    const double r_yp = yp_plus ? r1[i] : r2[i];
    const double r_other = yp_plus ? r2[i] : r1[i];
    const double a = std::abs(0.5 - pp);
    out.rhs += d.px[i] * (2.0 * a * (r_yp > r_other ? 1.0 : 0.0) + 0.5 - a);
  }
  return out;
}

struct PinskerResult {
  double tv = 0.0;
  double bound = 0.0;  // sqrt(KL(p || q) / 2)
};

/// Total variation and the Pinsker bound for binary distributions given as
/// p(+1) and q(+1).
inline PinskerResult pinsker_check(double p, double q) {
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0)) throw InvalidArgument("pinsker: probabilities must lie in [0, 1]");
  auto term = [](double a, double b) {
    if (a == 0.0) return 0.0;
    if (b == 0.0) throw InvalidArgument("pinsker: KL divergence is infinite (q = 0 where p > 0)");
    return a * std::log(a / b);
  };
  const double kl = term(p, q) + term(1.0 - p, 1.0 - q);
  return {std::abs(p - q), std::sqrt(std::max(kl, 0.0) / 2.0)};
}

/// p(+1|x) of the pseudo-confidence exp(-c r) normalized over both labels.
inline double pseudo_plus(double r1, double r2, double c) { return 1.0 / (1.0 + std::exp(-c * (r2 - r1))); }

// ---------------------------------------------------------------------------

struct VerifySummary {
  int instances = 0;
  int checks = 0;
  double max_violation = 0.0;  // max(0, lhs - rhs) over every bound check
  double mean_slack_erm_a = 0.0;
  double mean_slack_mle = 0.0;
  double max_ratio_erm_a = 0.0;  // max error^2 / rhs
  double max_ratio_mle = 0.0;
  double identity_max_gap = 0.0;
  double decomposition_max_gap = 0.0;

  bool ok(double tol = 1e-12) const noexcept {
    return max_violation <= tol && identity_max_gap <= tol && decomposition_max_gap <= 1e-10;
  }
};

inline Json to_json(const VerifySummary& s) {
  return Json{{"instances", s.instances},
              {"max_violation", s.max_violation},
              {"mean_slack_erm_a", s.mean_slack_erm_a},
              {"mean_slack_mle", s.mean_slack_mle},
              {"identity_max_gap", s.identity_max_gap},
              {"checks", s.checks},
              {"max_ratio_erm_a", s.max_ratio_erm_a},
              {"max_ratio_mle", s.max_ratio_mle},
              {"decomposition_max_gap", s.decomposition_max_gap},
              {"bound_form", "squared error vs combined expectation as printed (no extra factor 2)"}};
}

/// Random domain with `n_points` points in `dim` dimensions.
inline FiniteDomain random_domain(Rng& rng, std::size_t n_points, std::size_t dim) {
  FiniteDomain d;
  d.points = Matrix(n_points, dim);
  d.px.resize(n_points);
  d.cm_plus.resize(n_points);
  double s = 0.0;
  for (std::size_t i = 0; i < n_points; ++i) {
    for (std::size_t j = 0; j < dim; ++j) d.points(i, j) = rng.normal();
    s += (d.px[i] = rng.uniform() + 1e-3);
    d.cm_plus[i] = rng.uniform();
  }
  for (auto& p : d.px) p /= s;
  // Exact renormalization to within 1e-12.
  double t = 0.0;
  for (double p : d.px) t += p;
  d.px.back() += 1.0 - t;
  return d;
}

/// Checks every branch of the squared-error bounds on `n_instances` random
/// finite domains. `rhs_scale` multiplies every right-hand side (test hook
/// for a deliberately broken bound).
inline VerifySummary verify_theorem1(int n_instances, std::uint64_t seed, double rhs_scale = 1.0) {
  if (n_instances < 1) throw InvalidArgument("verify_theorem1: n_instances must be >= 1");
  static constexpr double kCs[] = {0.5, 1.0, 2.0};
  VerifySummary s;
  s.instances = n_instances;
  const Rng root(seed);
  int n_erm = 0, n_mle = 0;

  auto check = [&](double err, double rhs, double& slack_sum, int& count, double& ratio) {
    rhs *= rhs_scale;
    const double lhs = err * err;
    s.max_violation = std::max(s.max_violation, lhs - rhs);
    slack_sum += rhs - lhs;
    ++count;
    ++s.checks;
    if (rhs > 0.0) ratio = std::max(ratio, lhs / rhs);
  };

  for (int k = 0; k < n_instances; ++k) {
    Rng rng = root.derive(static_cast<std::uint64_t>(k));
    const auto n_points = static_cast<std::size_t>(3 + rng.below(8));
    const auto dim = static_cast<std::size_t>(1 + rng.below(3));
    const FiniteDomain d = random_domain(rng, n_points, dim);

    // Model-derived quantities from a random binary linear scorer.
    std::vector<double> w(dim);
    for (auto& v : w) v = 2.0 * rng.normal();
    const double b = rng.normal();
    std::vector<double> q_model(n_points), r1m(n_points), r2m(n_points);
    std::vector<double> q_unif(n_points), r1u(n_points), r2u(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
      const double z = dot(w, d.points.row(i)) + b;
      q_model[i] = std::clamp(1.0 / (1.0 + std::exp(-z)), 1e-9, 1.0 - 1e-9);
      r1m[i] = 1.0 - q_model[i];
      r2m[i] = q_model[i];
      q_unif[i] = std::clamp(rng.uniform(), 1e-9, 1.0 - 1e-9);
      r1u[i] = rng.uniform();
      r2u[i] = rng.uniform();
    }

    for (const auto* q : {&q_model, &q_unif})
      check(exact_error_conf(d, *q), mle_rhs(d, *q), s.mean_slack_mle, n_mle, s.max_ratio_mle);

    for (const auto& [r1, r2] : {std::pair{&r1m, &r2m}, std::pair{&r1u, &r2u}}) {
      const double err = exact_error_risk(d, *r1, *r2);
      for (double c : kCs) {
        const double rhs_a = erm_a_rhs(d, *r1, *r2, c);
        check(err, rhs_a, s.mean_slack_erm_a, n_erm, s.max_ratio_erm_a);

        // The MLE bound evaluated at the pseudo-confidence differs from the
        // ERM-a bound by exactly c * E[min(r1, r2)].
        std::vector<double> q(n_points);
        double emin = 0.0;
        for (std::size_t i = 0; i < n_points; ++i) {
          q[i] = pseudo_plus((*r1)[i], (*r2)[i], c);
          emin += d.px[i] * std::min((*r1)[i], (*r2)[i]);
        }
        s.decomposition_max_gap = std::max(s.decomposition_max_gap, std::abs(mle_rhs(d, q) - (rhs_a - c * emin)));
      }
      const auto id = erm_b_identity(d, *r1, *r2);
      s.identity_max_gap = std::max(s.identity_max_gap, std::abs(id.lhs - id.rhs));
    }
  }
  s.max_violation = std::max(s.max_violation, 0.0);
  s.mean_slack_erm_a /= std::max(n_erm, 1);
  s.mean_slack_mle /= std::max(n_mle, 1);
  return s;
}

}  // namespace delta_interp::bounds
