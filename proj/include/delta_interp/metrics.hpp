#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "delta_interp/evaluation.hpp"
#include "delta_interp/json_io.hpp"
#include "delta_interp/robustness.hpp"
#include "delta_interp/transfer.hpp"

namespace delta_interp {

inline constexpr const char* kIdentityFlag = "identity robustness set";
inline constexpr const char* kIdentityConventionFlag = "identity convention";

/// A ratio that may be undefined; `reason` explains an undefined value.
struct Ratio {
  std::optional<double> value;
  std::string reason;

  bool defined() const noexcept { return value.has_value(); }
};

inline Json to_json(const Ratio& r) { return r.value ? Json(*r.value) : Json(nullptr); }

/// delta = e_after / e_before; undefined when the baseline error is zero.
inline Ratio delta(double e_before, double e_after) {
  if (!(e_before >= 0.0) || !(e_after >= 0.0)) throw InvalidArgument("delta: errors must be non-negative");
  if (e_before == 0.0) return {std::nullopt, "baseline error is 0"};
  return {e_after / e_before, {}};
}

/// Ratio of robustness gaps (e_tmI_robust - e_tmI_test) / (e_tm_robust - e_tm_test).
inline Ratio gamma(double e_tm_test, double e_tm_robust, double e_tmI_test, double e_tmI_robust) {
  const double den = e_tm_robust - e_tm_test;
  const double num = e_tmI_robust - e_tmI_test;
  if (den == 0.0) {
    if (num == 0.0) return {std::nullopt, kIdentityFlag};
    return {std::nullopt, "baseline robustness gap is 0"};
  }
  return {num / den, {}};
}

struct ErrorQuad {
  double tm_test = 0.0;
  double tmI_test = 0.0;
  double tm_robust = 0.0;
  double tmI_robust = 0.0;
};

struct Provenance {
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> hashes;  // (role, fingerprint)
  std::string procedure;
  std::vector<std::string> label_names;
};

struct InterpretabilityReport {
  Ratio delta;
  Ratio gamma;
  ErrorQuad errors;
  LossKind loss = LossKind::zero_one;
  std::vector<std::string> flags;
  std::optional<double> gamma_convention;
  std::optional<double> delta_max;
  std::optional<double> gamma_max;
  Provenance provenance;
};

inline Json to_json(const InterpretabilityReport& r) {
  Json j;
  j["delta"] = to_json(r.delta);
  j["gamma"] = to_json(r.gamma);
  j["errors"] = Json{{"tm_test", r.errors.tm_test},
                     {"tmI_test", r.errors.tmI_test},
                     {"tm_robust", r.errors.tm_robust},
                     {"tmI_robust", r.errors.tmI_robust}};
  j["flags"] = r.flags;
  Json hashes = Json::object();
  for (const auto& [role, h] : r.provenance.hashes) hashes[role] = h;
  Json prov{{"seeds", r.provenance.seeds}, {"hashes", hashes}, {"procedure", r.provenance.procedure}};
  if (!r.provenance.label_names.empty()) prov["label_names"] = r.provenance.label_names;
  j["provenance"] = prov;
  j["loss"] = to_string(r.loss);
  if (r.gamma_convention) j["gamma_convention"] = *r.gamma_convention;
  if (r.delta_max) j["delta_max"] = *r.delta_max;
  if (r.gamma_max) j["gamma_max"] = *r.gamma_max;
  return j;
}

namespace detail {

inline void add_reason(std::vector<std::string>& flags, const std::string& what, const Ratio& r) {
  if (!r.defined()) flags.push_back(what + " undefined: " + r.reason);
}

}  // namespace detail

/// Derives delta, gamma and flags from four errors. `identical_sets` marks a
/// robustness set content-identical to the test set.
inline InterpretabilityReport make_report(const ErrorQuad& e, bool identical_sets = false) {
  InterpretabilityReport r;
  r.errors = e;
  r.delta = delta(e.tm_test, e.tmI_test);
  r.gamma = gamma(e.tm_test, e.tm_robust, e.tmI_test, e.tmI_robust);
  detail::add_reason(r.flags, "delta", r.delta);
  if (identical_sets) {
    r.gamma = {std::nullopt, kIdentityFlag};
    r.flags.push_back(kIdentityFlag);
    r.flags.push_back(kIdentityConventionFlag);
    r.gamma_convention = 0.0;
  } else {
    detail::add_reason(r.flags, "gamma", r.gamma);
  }
  return r;
}

/// Scores an improved model tmI against its baseline tm on a test set and a
/// robustness set. Both models must share a family.
inline InterpretabilityReport evaluate(const TrainedModel& tm, const TrainedModel& tmI, const Dataset& s_test,
                                       const Dataset& s_robust, LossKind loss = LossKind::zero_one) {
  if (tm.family() != tmI.family())
    throw InvalidArgument("evaluate: family mismatch (" + to_string(tm.family()) + " vs " + to_string(tmI.family()) +
                          ")");
  ErrorQuad e{empirical_error(tm, s_test, loss), empirical_error(tmI, s_test, loss), empirical_error(tm, s_robust, loss),
              empirical_error(tmI, s_robust, loss)};
  auto r = make_report(e, s_test.content_hash() == s_robust.content_hash());
  r.loss = loss;
  r.provenance.hashes = {{"test", s_test.fingerprint()}, {"robust", s_robust.fingerprint()}};
  r.provenance.label_names = s_test.label_names();
  return r;
}

/// Max-aggregate over several robustness sets: the primary fields come from
/// the first set; delta_max / gamma_max range over all sets (undefined values
/// are skipped).
inline InterpretabilityReport evaluate(const TrainedModel& tm, const TrainedModel& tmI, const Dataset& s_test,
                                       const std::vector<Dataset>& robust_sets, LossKind loss = LossKind::zero_one) {
  if (robust_sets.empty()) throw InvalidArgument("evaluate: no robustness sets");
  auto r = evaluate(tm, tmI, s_test, robust_sets.front(), loss);
  if (robust_sets.size() == 1) return r;
  for (std::size_t i = 0; i < robust_sets.size(); ++i) {
    const auto ri = i == 0 ? r : evaluate(tm, tmI, s_test, robust_sets[i], loss);
    const auto d = delta(ri.errors.tm_robust, ri.errors.tmI_robust);
    if (d.value) r.delta_max = std::max(r.delta_max.value_or(*d.value), *d.value);
    if (ri.gamma.value) r.gamma_max = std::max(r.gamma_max.value_or(*ri.gamma.value), *ri.gamma.value);
    if (i > 0) r.provenance.hashes.emplace_back("robust_" + std::to_string(i), robust_sets[i].fingerprint());
  }
  if (r.delta.value) r.delta_max = std::max(r.delta_max.value_or(*r.delta.value), *r.delta.value);
  return r;
}

struct SeedSummary {
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Median, mean and a 95% normal-approximation interval for the mean.
inline SeedSummary summarize(std::vector<double> v) {
  SeedSummary s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  const double se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  s.ci_low = s.mean - 1.96 * se;
  s.ci_high = s.mean + 1.96 * se;
  return s;
}

inline Json to_json(const SeedSummary& s) {
  return Json{{"count", s.count}, {"median", s.median}, {"mean", s.mean}, {"ci95", {s.ci_low, s.ci_high}}};
}

// ---------------------------------------------------------------------------
// Equal test and robustness distributions.

using Generator = std::function<Dataset(std::size_t n, std::uint64_t seed)>;

struct Proposition1Config {
  ModelSpec tm;
  ModelSpec cm;
  TransferSpec transfer;
  std::size_t n = 10000;       // size of S_T and S_R
  std::size_t n_train = 1000;  // size of the training draw
  int trials = 20;
  std::uint64_t seed = 0;
  bool same_draw = false;                  // S_R = S_T
  std::optional<RobustnessSpec> bias;      // applied to S_R (negative control)
};

struct GapStats {
  std::vector<double> gaps;  // e_robust - e_test per trial
  double mean = 0.0;
  double se = 0.0;
  bool within_3se = true;
};

struct Proposition1Report {
  GapStats tm;
  GapStats tmI;
  bool reduces = true;
  std::vector<std::string> flags;
};

namespace detail {

inline GapStats gap_stats(std::vector<double> gaps) {
  GapStats g;
  g.gaps = std::move(gaps);
  const auto n = static_cast<double>(g.gaps.size());
  for (double x : g.gaps) g.mean += x;
  g.mean /= n;
  double ss = 0.0;
  for (double x : g.gaps) ss += (x - g.mean) * (x - g.mean);
  g.se = g.gaps.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  g.within_3se = std::abs(g.mean) <= 3.0 * g.se;
  return g;
}

}  // namespace detail

/// Draws training, test and robustness samples from one generator and checks
/// that the robustness gaps of both the baseline and the improved model have
/// mean within 3 standard errors of zero.
inline Proposition1Report proposition1_check(const Proposition1Config& cfg, const Generator& gen) {
  if (cfg.n < 100) throw InvalidArgument("proposition1_check: n must be >= 100 for the standard-error test");
  if (cfg.trials < 2) throw InvalidArgument("proposition1_check: need >= 2 trials");
  const Rng root(cfg.seed);
  std::vector<double> g_tm, g_tmI;
  Proposition1Report rep;
  for (int t = 0; t < cfg.trials; ++t) {
    const Rng trial = root.derive(static_cast<std::uint64_t>(t));
    const Dataset train_set = gen(cfg.n_train, trial.derive(0)());
    const Dataset s_test = gen(cfg.n, trial.derive(1)());
    Dataset s_robust = cfg.same_draw ? s_test : gen(cfg.n, trial.derive(2)());
    if (cfg.bias) {
      auto b = *cfg.bias;
      b.seed = trial.derive(3)();
      s_robust = make_robust_set(s_robust, b);
    }
    const auto model_seed = trial.derive(4)();
    const auto tm = train(cfg.tm, train_set, model_seed);
    const auto cm = train(cfg.cm, train_set, model_seed);
    const auto tmI = transfer(cfg.tm, cm, train_set, cfg.transfer, model_seed);
    const auto r = evaluate(tm, tmI, s_test, s_robust);
    g_tm.push_back(r.errors.tm_robust - r.errors.tm_test);
    g_tmI.push_back(r.errors.tmI_robust - r.errors.tmI_test);
    if (t == 0)
      for (const auto& f : r.flags) rep.flags.push_back(f);
  }
  rep.tm = detail::gap_stats(std::move(g_tm));
  rep.tmI = detail::gap_stats(std::move(g_tmI));
  rep.reduces = rep.tm.within_3se && rep.tmI.within_3se;
  return rep;
}

inline Json to_json(const GapStats& g) {
  return Json{{"gaps", g.gaps}, {"mean", g.mean}, {"se", g.se}, {"within_3se", g.within_3se}};
}

inline Json to_json(const Proposition1Report& r) {
  return Json{{"tm", to_json(r.tm)}, {"tmI", to_json(r.tmI)}, {"reduces", r.reduces}, {"flags", r.flags}};
}

}  // namespace delta_interp
