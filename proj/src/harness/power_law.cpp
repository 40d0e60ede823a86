#include "rfloop/harness/power_law.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rfloop/errors.hpp"

namespace rfloop::harness {

PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("fit_power_law: xs and ys differ in length");
  if (xs.size() < 3) throw ContractError("fit_power_law: need at least 3 points, got " + std::to_string(xs.size()));
  const std::size_t m = xs.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(xs[i] > 0) || !(ys[i] > 0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw ContractError("fit_power_law: values must be positive and finite");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0)) throw ContractError("fit_power_law: xs must not all be equal");

  PowerLawFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points_used = static_cast<int>(m);
  if (syy == 0) {
    fit.r_squared = 1.0;
  } else {
    double ss_res = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      ss_res += r * r;
    }
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

}  // namespace rfloop::harness
