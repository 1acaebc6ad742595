#pragma once

#include <cstdint>
#include <string>

#include "delta_interp/matrix.hpp"

namespace delta_interp {

/// Optional margin regularizer added to a binary linear objective:
///   (1/m) * sum_i f(margin(x_i))  over the m rows of `points`.
/// `mle` uses f(u) = 2 exp(-2u) on the log-odds; `erm` uses
/// f(u) = log(1 + e^-u) + 2 exp(-2u) on c * |r1 - r2|.
struct MarginTerm {
  enum class Kind { none, mle, erm };
  Kind kind = Kind::none;
  double c = 1.0;
  Matrix points;
};

struct TrainOptions {
  /// Divides the weighted data term. 0 means "sum of row weights", which makes
  /// the objective invariant to positive rescaling of the weights.
  double data_normalizer = 0.0;
  MarginTerm margin;
};

struct TrainingInfo {
  bool converged = true;
  int iterations = 0;
  double grad_norm = 0.0;
  double objective = 0.0;
};

}  // namespace delta_interp
