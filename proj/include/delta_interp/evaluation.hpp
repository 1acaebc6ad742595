#pragma once

#include <functional>
#include <string>

#include "delta_interp/dataset.hpp"
#include "delta_interp/models.hpp"
#include "delta_interp/split.hpp"

namespace delta_interp {

/// Unweighted mean loss of the model's predictions; dataset weights are
/// ignored on purpose.
inline double empirical_error(const TrainedModel& model, const Dataset& data, LossKind loss = LossKind::zero_one) {
  if (data.empty()) throw InvalidArgument("empirical_error: empty dataset");
  detail::check_dim(model, data.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += loss_value(loss, predict(model, data.x(i)), data.y(i));
  return total / static_cast<double>(data.size());
}

/// Trains a model for one fold's training rows (fold index passed along).
using FoldTrainer = std::function<TrainedModel(const Dataset& train, std::size_t fold)>;

/// Mean held-out error over `folds` folds, each fold's model trained on the
/// remaining rows.
inline double cross_validated_error(const Dataset& data, int folds, LossKind loss, std::uint64_t seed,
                                    const FoldTrainer& trainer) {
  const auto parts = kfold_indices(data.size(), folds, seed);
  double total = 0.0;
  for (std::size_t f = 0; f < parts.size(); ++f) {
    TrainedModel m;
    try {
      m = trainer(data.subset(parts[f].train), f);
    } catch (const Error& e) {
      throw TrainingError("fold " + std::to_string(f) + ": " + e.what());
    }
    total += empirical_error(m, data.subset(parts[f].test), loss);
  }
  return total / static_cast<double>(parts.size());
}

inline double cross_validated_error(const ModelSpec& family, const Dataset& data, int folds, LossKind loss,
                                    std::uint64_t seed) {
  return cross_validated_error(data, folds, loss, seed, [&](const Dataset& train, std::size_t f) {
    return delta_interp::train(family, train, Rng(seed).derive(f)());
  });
}

}  // namespace delta_interp
