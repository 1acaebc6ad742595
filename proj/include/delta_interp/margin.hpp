#pragma once

#include <cmath>

namespace delta_interp {

// Non-increasing margin penalties from the squared-error bounds. `u` is the
// non-negative margin argument: c*|r1 - r2| for risk models, and
// |log p(-1|x) - log p(+1|x)| for likelihood models.

inline double margin_f_erm(double u) noexcept { return std::log1p(std::exp(-u)) + 2.0 * std::exp(-2.0 * u); }
inline double margin_f_erm_deriv(double u) noexcept { return -1.0 / (1.0 + std::exp(u)) - 4.0 * std::exp(-2.0 * u); }

inline double margin_f_mle(double u) noexcept { return 2.0 * std::exp(-2.0 * u); }
inline double margin_f_mle_deriv(double u) noexcept { return -4.0 * std::exp(-2.0 * u); }

inline double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace delta_interp
