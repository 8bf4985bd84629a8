#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace capstext::evalkit {

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
};

// Paired Student t-test on per-fold values. All-zero differences return
// t=0, p=1. Zero spread with a nonzero mean difference is reported as
// t = +-DBL_MAX with p = 0 (reports never carry infinities).
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, std::size_t dof);

struct TTestMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> t;  // antisymmetric, zero diagonal
  std::vector<std::vector<double>> p;  // symmetric, unit diagonal
};

TTestMatrix ttest_matrix(
    std::span<const std::pair<std::string, std::vector<double>>> series);

}  // namespace capstext::evalkit
