#pragma once

#include <span>

namespace rfloop::harness {

struct PowerLawFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  int points_used = 0;
};

/// Least-squares line through (log x, log y). Needs at least three points,
/// all strictly positive; callers take |values| and drop exact zeros first.
/// A perfectly flat series has R^2 = 1 by convention.
PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys);

}  // namespace rfloop::harness
