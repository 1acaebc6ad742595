#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "delta_interp/error.hpp"
#include "delta_interp/matrix.hpp"

namespace delta_interp {

using Label = int;

/// Samples (rows of `features`) with integer labels in [0, n_labels) and
/// optional non-negative per-sample weights. Weights are honored by training
/// only; evaluation is always unweighted.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Matrix features, std::vector<Label> labels, int n_labels,
          std::optional<std::vector<double>> weights = std::nullopt,
          std::vector<std::string> feature_names = {})
      : features_(std::move(features)),
        labels_(std::move(labels)),
        weights_(std::move(weights)),
        feature_names_(std::move(feature_names)),
        n_labels_(n_labels) {
    validate();
  }

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t dim() const noexcept { return features_.cols(); }
  int n_labels() const noexcept { return n_labels_; }

  const Matrix& features() const noexcept { return features_; }
  std::span<const double> x(std::size_t i) const noexcept { return features_.row(i); }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  Label y(std::size_t i) const noexcept { return labels_[i]; }

  bool has_weights() const noexcept { return weights_.has_value(); }
  const std::optional<std::vector<double>>& weights() const noexcept { return weights_; }
  /// Weight of row i; 1 when the dataset carries no weights.
  double weight(std::size_t i) const noexcept { return weights_ ? (*weights_)[i] : 1.0; }

  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  /// Display names of the label indices (e.g. CSV label tokens in
  /// first-appearance order). Empty when labels were numeric from the start.
  const std::vector<std::string>& label_names() const noexcept { return label_names_; }
  void set_label_names(std::vector<std::string> names) { label_names_ = std::move(names); }

  Dataset subset(std::span<const std::size_t> idx) const {
    std::vector<Label> labels;
    labels.reserve(idx.size());
    std::optional<std::vector<double>> w;
    if (weights_) w.emplace().reserve(idx.size());
    for (auto i : idx) {
      labels.push_back(labels_[i]);
      if (w) w->push_back((*weights_)[i]);
    }
    Dataset out;
    out.features_ = features_.select_rows(idx);
    out.labels_ = std::move(labels);
    out.weights_ = std::move(w);
    out.feature_names_ = feature_names_;
    out.label_names_ = label_names_;
    out.n_labels_ = n_labels_;
    return out;
  }

  Dataset with_weights(std::optional<std::vector<double>> w) const {
    Dataset out = *this;
    out.weights_ = std::move(w);
    out.validate();
    return out;
  }

  Dataset with_labels(std::vector<Label> labels) const {
    Dataset out = *this;
    out.labels_ = std::move(labels);
    out.validate();
    return out;
  }

  Dataset with_features(Matrix features) const {
    Dataset out = *this;
    out.features_ = std::move(features);
    out.validate();
    return out;
  }

  /// FNV-1a over (shape, K, feature bits, labels, weights). Names do not
  /// participate: two datasets with equal numeric content hash equal.
  std::uint64_t content_hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    };
    feed(size());
    feed(dim());
    feed(static_cast<std::uint64_t>(n_labels_));
    for (double v : features_.data()) feed(std::bit_cast<std::uint64_t>(v));
    for (Label l : labels_) feed(static_cast<std::uint64_t>(l));
    feed(weights_ ? 1 : 0);
    if (weights_)
      for (double v : *weights_) feed(std::bit_cast<std::uint64_t>(v));
    return h;
  }

  std::string fingerprint() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(content_hash()));
    return buf;
  }

 private:
  void validate() const {
    if (features_.rows() != labels_.size())
      throw DimensionMismatch("dataset: feature rows (" + std::to_string(features_.rows()) +
                              ") != labels (" + std::to_string(labels_.size()) + ")");
    if (n_labels_ < 2) throw InvalidArgument("dataset: need at least 2 labels, got " + std::to_string(n_labels_));
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] < 0 || labels_[i] >= n_labels_)
        throw InvalidArgument("dataset: label " + std::to_string(labels_[i]) + " at row " + std::to_string(i) +
                              " outside [0, " + std::to_string(n_labels_) + ")");
    if (weights_) {
      if (weights_->size() != labels_.size()) throw DimensionMismatch("dataset: weights length != rows");
      bool any_positive = false;
      for (std::size_t i = 0; i < weights_->size(); ++i) {
        const double w = (*weights_)[i];
        if (!(w >= 0.0) || !std::isfinite(w))
          throw InvalidArgument("dataset: weight at row " + std::to_string(i) + " is negative or not finite");
        any_positive = any_positive || w > 0.0;
      }
      if (!weights_->empty() && !any_positive) throw InvalidArgument("dataset: all weights are zero");
    }
    if (!feature_names_.empty() && feature_names_.size() != features_.cols())
      throw DimensionMismatch("dataset: feature_names length != feature columns");
  }

  Matrix features_;
  std::vector<Label> labels_;
  std::optional<std::vector<double>> weights_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> label_names_;
  int n_labels_ = 2;
};

/// Per-sample label probabilities emitted by a (complex) model.
class ConfidenceMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-9;

  ConfidenceMatrix() = default;
  ConfidenceMatrix(Matrix scores, std::string source_model_id)
      : scores_(std::move(scores)), source_(std::move(source_model_id)) {
    for (std::size_t i = 0; i < scores_.rows(); ++i) {
      double s = 0.0;
      for (double p : scores_.row(i)) {
        if (!(p >= 0.0 && p <= 1.0))
          throw InvalidArgument("confidence entry outside [0,1] at row " + std::to_string(i));
        s += p;
      }
      if (std::abs(s - 1.0) > kRowSumTolerance)
        throw InvalidArgument("confidence row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }

  std::size_t size() const noexcept { return scores_.rows(); }
  int n_labels() const noexcept { return static_cast<int>(scores_.cols()); }
  const Matrix& scores() const noexcept { return scores_; }
  std::span<const double> row(std::size_t i) const noexcept { return scores_.row(i); }
  double operator()(std::size_t i, Label y) const noexcept { return scores_(i, static_cast<std::size_t>(y)); }
  const std::string& source_model_id() const noexcept { return source_; }

 private:
  Matrix scores_;
  std::string source_;
};

/// Argmax with ties to the lowest index.
inline Label argmax(std::span<const double> v) noexcept {
  Label best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<Label>(k);
  return best;
}

/// Argmin with ties to the lowest index.
inline Label argmin(std::span<const double> v) noexcept {
  Label best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] < v[static_cast<std::size_t>(best)]) best = static_cast<Label>(k);
  return best;
}

enum class LossKind { zero_one, absolute_error };

inline double loss_value(LossKind kind, Label predicted, Label actual) noexcept {
  switch (kind) {
    case LossKind::zero_one:
      return predicted == actual ? 0.0 : 1.0;
    case LossKind::absolute_error:
      return std::abs(static_cast<double>(predicted) - static_cast<double>(actual));
  }
  return 0.0;
}

inline const char* to_string(LossKind kind) noexcept {
  return kind == LossKind::zero_one ? "zero_one" : "absolute_error";
}

inline LossKind parse_loss(const std::string& s) {
  if (s == "zero_one") return LossKind::zero_one;
  if (s == "absolute_error") return LossKind::absolute_error;
  throw InvalidArgument("unknown loss '" + s + "' (expected zero_one|absolute_error)");
}

}  // namespace delta_interp
