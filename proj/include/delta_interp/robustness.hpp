#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>

#include "delta_interp/dataset.hpp"
#include "delta_interp/rng.hpp"

namespace delta_interp {

/// Process inducing the robustness distribution from a test sample.
struct RobustnessSpec {
  enum class Kind { identity, label_flip, feature_noise, class_skew };
  Kind kind = Kind::identity;
  double fraction = 0.0;  // label_flip
  double sigma = 0.0;     // feature_noise
  Label label = 0;        // class_skew
  std::uint64_t seed = 0;

  static RobustnessSpec identity() { return {}; }
  static RobustnessSpec label_flip(double fraction, std::uint64_t seed = 0) {
    return {Kind::label_flip, fraction, 0.0, 0, seed};
  }
  static RobustnessSpec feature_noise(double sigma, std::uint64_t seed = 0) {
    return {Kind::feature_noise, 0.0, sigma, 0, seed};
  }
  static RobustnessSpec class_skew(Label label) { return {Kind::class_skew, 0.0, 0.0, label, 0}; }

  std::string describe() const {
    switch (kind) {
      case Kind::identity:
        return "identity";
      case Kind::label_flip:
        return "label_flip(" + std::to_string(fraction) + ")";
      case Kind::feature_noise:
        return "feature_noise(" + std::to_string(sigma) + ")";
      case Kind::class_skew:
        return "class_skew(" + std::to_string(label) + ")";
    }
    return "?";
  }
};

/// Any seeded Dataset -> Dataset map can serve as a robustness generator
/// (e.g. an adversarial attack supplied by the caller).
using RobustnessPlugin = std::function<Dataset(const Dataset&, std::uint64_t seed)>;

inline Dataset make_robust_set(const Dataset& test, const RobustnessSpec& spec) {
  switch (spec.kind) {
    case RobustnessSpec::Kind::identity:
      return test;

    case RobustnessSpec::Kind::label_flip: {
      if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0))
        throw InvalidArgument("label_flip: fraction must lie in [0, 1]");
      const std::size_t n = test.size();
      const auto count = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
      Rng rng(spec.seed);
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(idx));
      std::vector<Label> labels = test.labels();
      const auto K = static_cast<std::uint64_t>(test.n_labels());
      for (std::size_t i = 0; i < count; ++i) {
        // Uniform over the K-1 other labels.
        auto other = static_cast<Label>(rng.below(K - 1));
        if (other >= labels[idx[i]]) ++other;
        labels[idx[i]] = other;
      }
      return test.with_labels(std::move(labels));
    }

    case RobustnessSpec::Kind::feature_noise: {
      if (!(spec.sigma >= 0.0)) throw InvalidArgument("feature_noise: sigma must be >= 0");
      if (spec.sigma == 0.0) return test;
      Rng rng(spec.seed);
      Matrix f = test.features();
      for (double& v : f.data()) v += spec.sigma * rng.normal();
      return test.with_features(std::move(f));
    }

    case RobustnessSpec::Kind::class_skew: {
      if (spec.label < 0 || spec.label >= test.n_labels())
        throw InvalidArgument("class_skew: label " + std::to_string(spec.label) + " out of range");
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < test.size(); ++i)
        if (test.y(i) == spec.label) keep.push_back(i);
      if (keep.empty()) throw InvalidArgument("class_skew: label " + std::to_string(spec.label) + " absent from data");
      return test.subset(keep);
    }
  }
  return test;
}

}  // namespace delta_interp
