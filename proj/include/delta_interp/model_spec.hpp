#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "delta_interp/error.hpp"

namespace delta_interp {

enum class Family { linear_mle, linear_erm_hinge, decision_tree, knn, random_forest, mlp1 };

inline constexpr std::array<std::pair<Family, std::string_view>, 6> kFamilyNames{{
    {Family::linear_mle, "linear_mle"},
    {Family::linear_erm_hinge, "linear_erm_hinge"},
    {Family::decision_tree, "decision_tree"},
    {Family::knn, "knn"},
    {Family::random_forest, "random_forest"},
    {Family::mlp1, "mlp1"},
}};

inline std::string to_string(Family f) {
  for (const auto& [fam, name] : kFamilyNames)
    if (fam == f) return std::string(name);
  return "unknown";
}

inline Family parse_family(std::string_view s) {
  for (const auto& [fam, name] : kFamilyNames)
    if (name == s) return fam;
  throw InvalidArgument("unknown model family '" + std::string(s) + "'");
}

/// Families whose prediction is argmin of a per-label risk r(y, x, theta).
inline bool is_risk_family(Family f) noexcept { return f == Family::linear_erm_hinge; }
inline bool is_linear(Family f) noexcept { return f == Family::linear_mle || f == Family::linear_erm_hinge; }

/// Hyperparameter defaults per family. Every key a family accepts appears
/// here; anything else is rejected by ModelSpec::validate.
inline const std::map<std::string, double>& default_hyperparams(Family f) {
  static const std::map<Family, std::map<std::string, double>> table{
      {Family::linear_mle,
       {{"max_iter", 5000}, {"tol", 1e-7}, {"learning_rate", 0}, {"l2", 1e-3}, {"strict_convergence", 0}}},
      {Family::linear_erm_hinge,
       {{"max_iter", 5000},
        {"tol", 1e-7},
        {"learning_rate", 0},
        {"l2", 1e-3},
        {"strict_convergence", 0},
        {"hinge_smoothing", 0.5},
        {"pseudo_c", 1.0}}},
      {Family::decision_tree, {{"max_depth", 6}, {"min_samples_leaf", 1}}},
      {Family::knn, {{"k", 5}}},
      {Family::random_forest, {{"n_trees", 50}, {"max_depth", 8}, {"min_samples_leaf", 1}, {"max_features", 0}}},
      {Family::mlp1,
       {{"hidden_units", 16},
        {"max_iter", 3000},
        {"tol", 1e-7},
        {"learning_rate", 0.5},
        {"l2", 1e-4},
        {"strict_convergence", 0}}},
  };
  return table.at(f);
}

struct ModelSpec {
  Family family = Family::linear_mle;
  std::map<std::string, double> hyperparams;

  ModelSpec() = default;
  explicit ModelSpec(Family f, std::map<std::string, double> hp = {}) : family(f), hyperparams(std::move(hp)) {
    validate();
  }

  double get(const std::string& key) const {
    if (auto it = hyperparams.find(key); it != hyperparams.end()) return it->second;
    const auto& defaults = default_hyperparams(family);
    if (auto it = defaults.find(key); it != defaults.end()) return it->second;
    throw InvalidArgument(to_string(family) + ": no hyperparameter '" + key + "'");
  }

  int get_int(const std::string& key) const { return static_cast<int>(get(key)); }

  ModelSpec with(const std::string& key, double value) const {
    ModelSpec out = *this;
    out.hyperparams[key] = value;
    out.validate();
    return out;
  }

  void validate() const {
    const auto& defaults = default_hyperparams(family);
    for (const auto& [k, v] : hyperparams) {
      if (!defaults.contains(k)) throw InvalidArgument(to_string(family) + ": unknown hyperparameter '" + k + "'");
      if (!(v >= 0.0)) throw InvalidArgument(to_string(family) + "." + k + " must be >= 0");
    }
    auto positive_int = [&](const char* key) {
      const double v = get(key);
      if (v < 1.0 || v != static_cast<double>(static_cast<long long>(v)))
        throw InvalidArgument(to_string(family) + "." + key + " must be a positive integer");
    };
    switch (family) {
      case Family::knn:
        positive_int("k");
        break;
      case Family::decision_tree:
        positive_int("max_depth");
        positive_int("min_samples_leaf");
        break;
      case Family::random_forest:
        positive_int("n_trees");
        positive_int("max_depth");
        positive_int("min_samples_leaf");
        break;
      case Family::mlp1:
        positive_int("hidden_units");
        positive_int("max_iter");
        if (get("learning_rate") <= 0.0) throw InvalidArgument("mlp1.learning_rate must be > 0");
        break;
      case Family::linear_erm_hinge:
        if (get("pseudo_c") <= 0.0) throw InvalidArgument("linear_erm_hinge.pseudo_c must be > 0");
        if (get("hinge_smoothing") == 0.0 && get("learning_rate") == 0.0)
          throw InvalidArgument("linear_erm_hinge: unsmoothed hinge needs an explicit learning_rate");
        positive_int("max_iter");
        break;
      case Family::linear_mle:
        positive_int("max_iter");
        break;
    }
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

}  // namespace delta_interp
