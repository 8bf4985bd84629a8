#include "capstext/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "capstext/error.hpp"

namespace capstext::numcore {

double grad_check(const ScalarFn& f, std::span<const double> theta,
                  std::span<const double> analytic, double eps) {
  if (!(eps > 0.0)) throw InputError("grad_check: eps must be positive");
  if (theta.size() != analytic.size()) {
    throw ShapeError("grad_check: theta and analytic gradient sizes differ");
  }
  std::vector<double> point(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double f_plus = f(point);
    point[i] = saved - eps;
    const double f_minus = f(point);
    point[i] = saved;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw EvalError("grad_check: non-finite function value at perturbed point " +
                      std::to_string(i));
    }
    const double central = (f_plus - f_minus) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(central));
    const double rel = std::abs(analytic[i] - central) / denom;
    if (rel > worst) worst = rel;
  }
  return worst;
}

}  // namespace capstext::numcore
