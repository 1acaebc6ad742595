#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/json_io.hpp"
#include "delta_interp/log.hpp"
#include "delta_interp/model_spec.hpp"
#include "delta_interp/models/knn.hpp"
#include "delta_interp/models/linear.hpp"
#include "delta_interp/models/mlp.hpp"
#include "delta_interp/models/tree.hpp"
#include "delta_interp/rng.hpp"
#include "delta_interp/training.hpp"

namespace delta_interp {

using ModelParams =
    std::variant<linear::LinearParams, tree::TreeParams, tree::ForestParams, knn::KnnParams, mlp::MlpParams>;

/// A fitted model. Immutable after training; predict and confidence are pure
/// functions of (params, x).
struct TrainedModel {
  ModelSpec spec;
  int n_labels = 2;
  std::size_t feature_dim = 0;
  ModelParams params;
  TrainingInfo info;

  Family family() const noexcept { return spec.family; }
};

/// p(y|x) proportional to exp(-c * r(y, x)); the argmax equals the argmin of
/// the risk for every c > 0.
inline void pseudo_confidence(std::span<const double> risks, double c, std::span<double> out) {
  if (!(c > 0.0)) throw InvalidArgument("pseudo-confidence: c must be > 0");
  const double rmin = *std::min_element(risks.begin(), risks.end());
  double s = 0.0;
  for (std::size_t k = 0; k < risks.size(); ++k) s += (out[k] = std::exp(-c * (risks[k] - rmin)));
  for (auto& v : out) v /= s;
}

namespace detail {

inline void check_dim(const TrainedModel& m, std::size_t d) {
  if (d != m.feature_dim)
    throw DimensionMismatch(to_string(m.family()) + ": model expects " + std::to_string(m.feature_dim) +
                            " features, got " + std::to_string(d));
}

}  // namespace detail

/// Fits `spec` on `data` honoring per-row weights (absent weights = all ones).
/// `opts` carries the transfer-specific objective tweaks and applies to the
/// linear families only.
inline TrainedModel train(const ModelSpec& spec, const Dataset& data, std::uint64_t seed,
                          const TrainOptions& opts = {}) {
  spec.validate();
  if (data.empty()) throw InvalidArgument("train: empty dataset");
  if (data.size() < static_cast<std::size_t>(data.n_labels()))
    throw InvalidArgument("train: fewer rows than labels");
  if (opts.margin.kind != MarginTerm::Kind::none && !is_linear(spec.family))
    throw InvalidArgument("train: margin penalty is only defined for linear families");

  TrainedModel m;
  m.spec = spec;
  m.n_labels = data.n_labels();
  m.feature_dim = data.dim();
  Rng rng(seed);

  switch (spec.family) {
    case Family::linear_mle:
    case Family::linear_erm_hinge: {
      linear::FitSettings s;
      s.loss = spec.family == Family::linear_mle ? linear::Loss::softmax_nll : linear::Loss::ovr_hinge;
      s.l2 = spec.get("l2");
      s.learning_rate = spec.get("learning_rate");
      s.max_iter = spec.get_int("max_iter");
      s.tol = spec.get("tol");
      if (spec.family == Family::linear_erm_hinge) s.hinge_smoothing = spec.get("hinge_smoothing");
      auto fit = linear::fit(data, s, opts);
      if (spec.family == Family::linear_erm_hinge) fit.params.pseudo_c = spec.get("pseudo_c");
      m.params = std::move(fit.params);
      m.info = fit.info;
      break;
    }
    case Family::decision_tree: {
      tree::GrowSettings s{spec.get_int("max_depth"), spec.get_int("min_samples_leaf"), 0};
      m.params = tree::fit_tree(data, s);
      break;
    }
    case Family::random_forest: {
      tree::GrowSettings s{spec.get_int("max_depth"), spec.get_int("min_samples_leaf"), spec.get_int("max_features")};
      m.params = tree::fit_forest(data, spec.get_int("n_trees"), s, rng);
      break;
    }
    case Family::knn:
      m.params = knn::fit(data, spec.get_int("k"));
      break;
    case Family::mlp1: {
      mlp::FitSettings s{spec.get_int("hidden_units"), spec.get("learning_rate"), spec.get_int("max_iter"),
                         spec.get("tol"), spec.get("l2")};
      auto fit = mlp::fit(data, s, rng);
      m.params = std::move(fit.params);
      m.info = fit.info;
      break;
    }
  }

  if (!m.info.converged) {
    const std::string msg = to_string(spec.family) + ": no convergence after " + std::to_string(m.info.iterations) +
                            " iterations (|grad| = " + std::to_string(m.info.grad_norm) + ")";
    if (spec.hyperparams.contains("strict_convergence") && spec.get("strict_convergence") != 0.0)
      throw TrainingError(msg);
    log::warn(msg);
  }
  return m;
}

/// Per-label risks r(y, x, theta); defined for risk-minimization families.
inline void risks(const TrainedModel& m, std::span<const double> x, std::span<double> out) {
  detail::check_dim(m, x.size());
  if (!is_risk_family(m.family())) throw InvalidArgument(to_string(m.family()) + " does not expose risks");
  const auto& p = std::get<linear::LinearParams>(m.params);
  std::vector<double> s(p.n_labels());
  p.scores(x, s);
  linear::ovr_risks(s, p.hinge_smoothing, out);
}

inline void confidence_row(const TrainedModel& m, std::span<const double> x, std::span<double> out) {
  detail::check_dim(m, x.size());
  switch (m.family()) {
    case Family::linear_mle: {
      std::get<linear::LinearParams>(m.params).scores(x, out);
      linear::softmax_inplace(out);
      return;
    }
    case Family::linear_erm_hinge: {
      std::vector<double> r(out.size());
      risks(m, x, r);
      pseudo_confidence(r, std::get<linear::LinearParams>(m.params).pseudo_c, out);
      return;
    }
    case Family::decision_tree:
      std::get<tree::TreeParams>(m.params).confidence(x, out);
      return;
    case Family::random_forest:
      std::get<tree::ForestParams>(m.params).confidence(x, out);
      return;
    case Family::knn:
      std::get<knn::KnnParams>(m.params).confidence(x, out);
      return;
    case Family::mlp1:
      std::get<mlp::MlpParams>(m.params).confidence(x, out);
      return;
  }
}

inline ConfidenceMatrix confidence(const TrainedModel& m, const Matrix& features) {
  detail::check_dim(m, features.cols());
  Matrix out(features.rows(), static_cast<std::size_t>(m.n_labels));
  for (std::size_t i = 0; i < features.rows(); ++i) confidence_row(m, features.row(i), out.row(i));
  return ConfidenceMatrix(std::move(out), to_string(m.family()));
}

/// Argmin of risk for risk families, argmax of confidence otherwise; ties go
/// to the lowest label.
inline Label predict(const TrainedModel& m, std::span<const double> x) {
  std::vector<double> v(static_cast<std::size_t>(m.n_labels));
  if (is_risk_family(m.family())) {
    risks(m, x, v);
    return argmin(v);
  }
  confidence_row(m, x, v);
  return argmax(v);
}

inline std::vector<Label> predict(const TrainedModel& m, const Matrix& features) {
  detail::check_dim(m, features.cols());
  std::vector<Label> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) out[i] = predict(m, features.row(i));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: {"family", "hyperparams", "n_labels", "feature_dim", "params"}

namespace detail {

inline Json matrix_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from(const Json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

inline Json tree_json(const tree::TreeParams& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf())
      nodes.push_back(Json{{"counts", n.counts}});
    else
      nodes.push_back(Json{{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
  }
  return nodes;
}

inline tree::TreeParams tree_from(const Json& j) {
  tree::TreeParams t;
  for (const auto& n : j) {
    tree::Node node;
    if (n.contains("counts")) {
      node.counts = n.at("counts").get<std::vector<double>>();
    } else {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    t.nodes.push_back(std::move(node));
  }
  return t;
}

}  // namespace detail

inline Json to_json(const TrainedModel& m) {
  Json hp = Json::object();
  for (const auto& [k, v] : m.spec.hyperparams) hp[k] = v;
  Json params = std::visit(
      [](const auto& p) -> Json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, linear::LinearParams>) {
          return Json{{"weights", detail::matrix_json(p.weights)},
                      {"hinge_smoothing", p.hinge_smoothing},
                      {"pseudo_c", p.pseudo_c}};
        } else if constexpr (std::is_same_v<P, tree::TreeParams>) {
          return Json{{"nodes", detail::tree_json(p)}};
        } else if constexpr (std::is_same_v<P, tree::ForestParams>) {
          Json trees = Json::array();
          for (const auto& t : p.trees) trees.push_back(detail::tree_json(t));
          return Json{{"trees", trees}};
        } else if constexpr (std::is_same_v<P, knn::KnnParams>) {
          return Json{{"k", p.k}, {"points", detail::matrix_json(p.points)}, {"labels", p.labels}, {"weights", p.weights}};
        } else {
          return Json{{"hidden", detail::matrix_json(p.hidden)},
                      {"output", detail::matrix_json(p.output)},
                      {"mean", p.mean},
                      {"scale", p.scale}};
        }
      },
      m.params);
  return Json{{"family", to_string(m.family())},
              {"hyperparams", hp},
              {"n_labels", m.n_labels},
              {"feature_dim", m.feature_dim},
              {"params", params}};
}

inline TrainedModel model_from_json(const Json& j) {
  TrainedModel m;
  std::map<std::string, double> hp;
  for (auto it = j.at("hyperparams").begin(); it != j.at("hyperparams").end(); ++it) hp[it.key()] = it.value().get<double>();
  m.spec = ModelSpec(parse_family(j.at("family").get<std::string>()), hp);
  m.n_labels = j.at("n_labels").get<int>();
  m.feature_dim = j.at("feature_dim").get<std::size_t>();
  const Json& p = j.at("params");
  switch (m.family()) {
    case Family::linear_mle:
    case Family::linear_erm_hinge:
      m.params = linear::LinearParams{detail::matrix_from(p.at("weights")), p.at("hinge_smoothing").get<double>(),
                                      p.at("pseudo_c").get<double>()};
      break;
    case Family::decision_tree:
      m.params = detail::tree_from(p.at("nodes"));
      break;
    case Family::random_forest: {
      tree::ForestParams f;
      f.n_labels = m.n_labels;
      for (const auto& t : p.at("trees")) f.trees.push_back(detail::tree_from(t));
      m.params = std::move(f);
      break;
    }
    case Family::knn: {
      knn::KnnParams k;
      k.k = p.at("k").get<int>();
      k.points = detail::matrix_from(p.at("points"));
      k.labels = p.at("labels").get<std::vector<Label>>();
      k.weights = p.at("weights").get<std::vector<double>>();
      k.n_labels = m.n_labels;
      m.params = std::move(k);
      break;
    }
    case Family::mlp1:
      m.params = mlp::MlpParams{detail::matrix_from(p.at("hidden")), detail::matrix_from(p.at("output")),
                                p.at("mean").get<std::vector<double>>(), p.at("scale").get<std::vector<double>>()};
      break;
  }
  return m;
}

}  // namespace delta_interp
