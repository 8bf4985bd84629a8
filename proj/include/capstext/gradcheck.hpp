#pragma once

#include <functional>
#include <span>

namespace capstext::numcore {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central-difference gradient verification. Returns the maximum over
// coordinates of |analytic - central| / max(1e-8, |analytic| + |central|).
// Throws EvalError if f is non-finite at any perturbed point.
double grad_check(const ScalarFn& f, std::span<const double> theta,
                  std::span<const double> analytic, double eps);

}  // namespace capstext::numcore
