#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/evaluation.hpp"
#include "delta_interp/margin.hpp"
#include "delta_interp/models.hpp"

namespace delta_interp {

enum class Procedure { mle_weighting, erm_a, erm_b };
enum class MarginKind { none, paper_f };

inline std::string to_string(Procedure p) {
  switch (p) {
    case Procedure::mle_weighting:
      return "mle_weighting";
    case Procedure::erm_a:
      return "erm_a";
    case Procedure::erm_b:
      return "erm_b";
  }
  return "?";
}

inline Procedure parse_procedure(const std::string& s) {
  if (s == "mle_weighting") return Procedure::mle_weighting;
  if (s == "erm_a") return Procedure::erm_a;
  if (s == "erm_b") return Procedure::erm_b;
  throw InvalidArgument("unknown transfer procedure '" + s + "' (expected mle_weighting|erm_a|erm_b)");
}

inline MarginKind parse_margin(const std::string& s) {
  if (s == "none") return MarginKind::none;
  if (s == "paper_f") return MarginKind::paper_f;
  throw InvalidArgument("unknown margin '" + s + "' (expected none|paper_f)");
}

inline const std::vector<double>& default_c_grid() {
  static const std::vector<double> grid{0.1, 0.5, 1.0, 2.0, 5.0};
  return grid;
}

struct TransferSpec {
  struct Tuning {
    std::vector<double> grid = default_c_grid();
    int folds = 3;
  };

  Procedure procedure = Procedure::mle_weighting;
  double c = 1.0;
  MarginKind margin = MarginKind::none;
  std::optional<Tuning> tuning;

  void validate() const {
    if (!(c > 0.0)) throw InvalidArgument("transfer: c must be > 0");
    if (tuning) {
      if (tuning->grid.empty()) throw InvalidArgument("transfer: empty c grid");
      for (double g : tuning->grid)
        if (!(g > 0.0)) throw InvalidArgument("transfer: c grid values must be > 0");
      if (tuning->folds < 2) throw InvalidArgument("transfer: tuning needs >= 2 folds");
    }
  }
};

/// Confidence-derived training rows over a base dataset. Rows may repeat a
/// sample under different labels (erm_a expansion).
struct WeightedTrainingSet {
  struct Row {
    std::size_t sample;
    Label label;
    double weight;
  };

  Dataset base;
  std::vector<Row> rows;
  Procedure procedure = Procedure::mle_weighting;

  /// Materializes the rows as a weighted Dataset the trainers consume.
  Dataset to_dataset() const {
    std::vector<std::size_t> idx;
    std::vector<Label> labels;
    std::vector<double> w;
    idx.reserve(rows.size());
    for (const auto& r : rows) {
      idx.push_back(r.sample);
      labels.push_back(r.label);
      w.push_back(r.weight);
    }
    return base.subset(idx).with_labels(std::move(labels)).with_weights(std::move(w));
  }

  std::vector<double> weights() const {
    std::vector<double> w;
    w.reserve(rows.size());
    for (const auto& r : rows) w.push_back(r.weight);
    return w;
  }
};

namespace detail {

inline void check_aligned(const ConfidenceMatrix& conf, const Dataset& data) {
  if (conf.size() != data.size())
    throw DimensionMismatch("confidence rows (" + std::to_string(conf.size()) + ") != dataset rows (" +
                            std::to_string(data.size()) + ")");
  if (conf.n_labels() != data.n_labels())
    throw DimensionMismatch("confidence labels (" + std::to_string(conf.n_labels()) + ") != dataset labels (" +
                            std::to_string(data.n_labels()) + ")");
}

inline void require_positive(const WeightedTrainingSet& set, const std::string& who) {
  if (std::none_of(set.rows.begin(), set.rows.end(), [](const auto& r) { return r.weight > 0.0; }))
    throw TrainingError(who + ": every weight is zero (complex model confidences carry no signal)");
}

}  // namespace detail

/// One row per sample: the training label, weighted by the complex model's
/// confidence in it.
inline WeightedTrainingSet weights_mle(const ConfidenceMatrix& conf, const Dataset& data) {
  detail::check_aligned(conf, data);
  WeightedTrainingSet set{data.with_weights(std::nullopt), {}, Procedure::mle_weighting};
  set.rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) set.rows.push_back({i, data.y(i), conf(i, data.y(i))});
  detail::require_positive(set, "mle_weighting");
  return set;
}

/// Binary only. One row per sample relabelled with the complex model's
/// prediction y' and weighted by |1/2 - p(y'|x)|.
inline WeightedTrainingSet weights_erm_b(const ConfidenceMatrix& conf, const Dataset& data) {
  detail::check_aligned(conf, data);
  if (data.n_labels() != 2)
    throw InvalidArgument("erm_b: defined for 2 labels only, dataset has " + std::to_string(data.n_labels()));
  WeightedTrainingSet set{data.with_weights(std::nullopt), {}, Procedure::erm_b};
  set.rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Label yp = argmax(conf.row(i));
    set.rows.push_back({i, yp, std::abs(0.5 - conf(i, yp))});
  }
  detail::require_positive(set, "erm_b");
  return set;
}

/// K rows per sample, one per label y, weighted c * p(y|x).
inline WeightedTrainingSet expand_erm_a(const ConfidenceMatrix& conf, const Dataset& data, double c) {
  detail::check_aligned(conf, data);
  if (!(c > 0.0)) throw InvalidArgument("erm_a: c must be > 0");
  WeightedTrainingSet set{data.with_weights(std::nullopt), {}, Procedure::erm_a};
  set.rows.reserve(data.size() * static_cast<std::size_t>(data.n_labels()));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (Label y = 0; y < data.n_labels(); ++y) set.rows.push_back({i, y, c * conf(i, y)});
  detail::require_positive(set, "erm_a");
  return set;
}

/// Margin penalty f at x for a binary model: for risk models
/// log(1 + e^-u) + 2e^-2u with u = c|r1 - r2|; for likelihood models 2e^-2u
/// with u = |log p(-1|x) - log p(+1|x)| (c unused).
inline double margin_penalty(const TrainedModel& model, std::span<const double> x, double c) {
  if (model.n_labels != 2) throw InvalidArgument("margin_penalty: binary models only");
  std::vector<double> v(2);
  if (is_risk_family(model.family())) {
    if (!(c > 0.0)) throw InvalidArgument("margin_penalty: c must be > 0");
    risks(model, x, v);
    return margin_f_erm(c * std::abs(v[1] - v[0]));
  }
  confidence_row(model, x, v);
  return margin_f_mle(std::abs(std::log(v[0]) - std::log(v[1])));
}

/// The procedure's realized objective (without the l2 term) evaluated through
/// the model's public confidence / risk surface. For margin = paper_f this is
/// the empirical average of the corresponding squared-error bound.
inline double transfer_objective(const TrainedModel& model, const ConfidenceMatrix& conf, const Dataset& data,
                                 const TransferSpec& spec) {
  detail::check_aligned(conf, data);
  const auto K = static_cast<std::size_t>(data.n_labels());
  const bool with_f = spec.margin == MarginKind::paper_f;
  std::vector<double> v(K);
  double total = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto x = data.x(i);
    switch (spec.procedure) {
      case Procedure::mle_weighting:
        confidence_row(model, x, v);
        if (with_f) {
          for (std::size_t y = 0; y < K; ++y) total -= conf(i, static_cast<Label>(y)) * std::log(v[y]);
          total += margin_f_mle(std::abs(std::log(v[0]) - std::log(v[1])));
        } else {
          const double w = conf(i, data.y(i));
          total -= w * std::log(v[static_cast<std::size_t>(data.y(i))]);
          wsum += w;
        }
        break;
      case Procedure::erm_a:
        risks(model, x, v);
        for (std::size_t y = 0; y < K; ++y) {
          total += spec.c * conf(i, static_cast<Label>(y)) * v[y];
          wsum += spec.c * conf(i, static_cast<Label>(y));
        }
        if (with_f) total += margin_f_erm(spec.c * std::abs(v[1] - v[0]));
        break;
      case Procedure::erm_b: {
        risks(model, x, v);
        const Label yp = argmax(conf.row(i));
        const double w = std::abs(0.5 - conf(i, yp));
        total += w * v[static_cast<std::size_t>(yp)];
        wsum += w;
        break;
      }
    }
  }
  const double norm = with_f ? static_cast<double>(data.size()) : wsum;
  return total / norm;
}

struct TransferResult {
  TrainedModel model;
  WeightedTrainingSet training_set;
  double c = 1.0;
};

namespace detail {

inline WeightedTrainingSet build_set(const ConfidenceMatrix& conf, const Dataset& data, const TransferSpec& spec,
                                     double c) {
  switch (spec.procedure) {
    case Procedure::mle_weighting:
      // With the margin term the full cross-entropy over both labels is
      // optimized, which is the expanded form with weights p(y|x).
      return spec.margin == MarginKind::paper_f ? [&] {
        auto s = expand_erm_a(conf, data, 1.0);
        s.procedure = Procedure::mle_weighting;
        return s;
      }()
                                                : weights_mle(conf, data);
    case Procedure::erm_a:
      return expand_erm_a(conf, data, c);
    case Procedure::erm_b:
      return weights_erm_b(conf, data);
  }
  throw InvalidArgument("unknown procedure");
}

inline TrainOptions train_options(const Dataset& data, const TransferSpec& spec, const ModelSpec& tm, double c) {
  TrainOptions opts;
  if (spec.margin == MarginKind::none) return opts;
  if (data.n_labels() != 2) throw InvalidArgument("paper_f margin requires binary data");
  opts.data_normalizer = static_cast<double>(data.size());
  opts.margin.points = data.features();
  opts.margin.c = c;
  switch (spec.procedure) {
    case Procedure::mle_weighting:
      if (tm.family != Family::linear_mle) throw InvalidArgument("mle_weighting with paper_f needs linear_mle");
      opts.margin.kind = MarginTerm::Kind::mle;
      break;
    case Procedure::erm_a:
      if (tm.family != Family::linear_erm_hinge) throw InvalidArgument("erm_a with paper_f needs linear_erm_hinge");
      opts.margin.kind = MarginTerm::Kind::erm;
      break;
    case Procedure::erm_b:
      throw InvalidArgument("erm_b has no margin term; use margin = none");
  }
  return opts;
}

inline TrainedModel retrain(const ModelSpec& tm_spec, const ConfidenceMatrix& conf, const Dataset& data,
                            const TransferSpec& spec, double c, std::uint64_t seed, WeightedTrainingSet* out_set) {
  auto set = build_set(conf, data, spec, c);
  auto model = train(tm_spec, set.to_dataset(), seed, train_options(data, spec, tm_spec, c));
  if (out_set) *out_set = std::move(set);
  return model;
}

inline ConfidenceMatrix select_rows(const ConfidenceMatrix& conf, std::span<const std::size_t> idx) {
  return ConfidenceMatrix(conf.scores().select_rows(idx), conf.source_model_id());
}

}  // namespace detail

/// Grid value with the lowest cross-validated error; ties go to the smallest
/// value. `cv_error` is called once per grid point.
template <typename CvError>
double select_c(std::vector<double> grid, CvError&& cv_error) {
  if (grid.empty()) throw InvalidArgument("tune_c: empty grid");
  std::sort(grid.begin(), grid.end());
  double best_c = grid.front();
  double best = cv_error(best_c);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double e = cv_error(grid[i]);
    if (e < best) {
      best = e;
      best_c = grid[i];
    }
  }
  return best_c;
}

/// Picks c for the erm_a procedure by K-fold cross-validated 0-1 error of the
/// retrained target model. Folds are over samples; confidences come from the
/// full training set.
inline double tune_c(const std::vector<double>& grid, const Dataset& data, const ConfidenceMatrix& conf, int folds,
                     std::uint64_t seed, const ModelSpec& tm_spec, MarginKind margin = MarginKind::none) {
  detail::check_aligned(conf, data);
  TransferSpec spec;
  spec.procedure = Procedure::erm_a;
  spec.margin = margin;
  const auto parts = kfold_indices(data.size(), folds, seed);
  return select_c(grid, [&](double c) {
    spec.c = c;
    double total = 0.0;
    for (std::size_t f = 0; f < parts.size(); ++f) {
      const Dataset train_part = data.subset(parts[f].train);
      const auto conf_part = detail::select_rows(conf, parts[f].train);
      TrainedModel m;
      try {
        m = detail::retrain(tm_spec, conf_part, train_part, spec, c, Rng(seed).derive(f)(), nullptr);
      } catch (const Error& e) {
        throw TrainingError("tune_c: c=" + std::to_string(c) + " fold " + std::to_string(f) + ": " + e.what());
      }
      total += empirical_error(m, data.subset(parts[f].test), LossKind::zero_one);
    }
    return total / static_cast<double>(parts.size());
  });
}

/// Retrains the target family on confidence-weighted data derived from `cm`.
/// The returned model always has tm_spec's family.
inline TransferResult transfer_detailed(const ModelSpec& tm_spec, const TrainedModel& cm, const Dataset& train_set,
                                        const TransferSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto conf = confidence(cm, train_set.features());
  TransferResult out;
  out.c = spec.c;
  if (spec.tuning && spec.procedure == Procedure::erm_a)
    out.c = tune_c(spec.tuning->grid, train_set, conf, spec.tuning->folds, seed, tm_spec, spec.margin);
  out.model = detail::retrain(tm_spec, conf, train_set, spec, out.c, seed, &out.training_set);
  if (out.model.family() != tm_spec.family) throw Error("transfer changed the target family");
  return out;
}

inline TrainedModel transfer(const ModelSpec& tm_spec, const TrainedModel& cm, const Dataset& train_set,
                             const TransferSpec& spec, std::uint64_t seed) {
  return transfer_detailed(tm_spec, cm, train_set, spec, seed).model;
}

}  // namespace delta_interp
