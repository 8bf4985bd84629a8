#include "capstext/stats.hpp"

#include <cmath>
#include <limits>

#include "capstext/error.hpp"

namespace capstext::evalkit {

namespace {

// Continued-fraction evaluation (modified Lentz) of the incomplete beta
// function; standard formulation, converges quickly for x in (0,1).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 300;
  constexpr double kEpsilon = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m_d = static_cast<double>(m);
    const double m2 = 2.0 * m_d;
    double aa = m_d * (b - m_d) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m_d) * (qab + m_d) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) return h;
  }
  throw EvalError("incomplete beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw InputError("incomplete beta: parameters must be positive");
  }
  if (x < 0.0 || x > 1.0) {
    throw InputError("incomplete beta: x outside [0,1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, std::size_t dof) {
  if (dof == 0) throw InputError("student_t_cdf: zero degrees of freedom");
  const double v = static_cast<double>(dof);
  const double x = v / (v + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(v / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("paired_ttest: series lengths differ");
  }
  const std::size_t k = a.size();
  if (k < 2) {
    throw InputError("paired_ttest: need at least 2 paired values");
  }
  std::vector<double> diff(k);
  bool all_zero = true;
  for (std::size_t i = 0; i < k; ++i) {
    diff[i] = a[i] - b[i];
    if (diff[i] != 0.0) all_zero = false;
  }
  if (all_zero) return {0.0, 1.0};

  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(k - 1));
  if (sd == 0.0) {
    // Constant nonzero difference: infinitely significant.
    return {mean > 0.0 ? std::numeric_limits<double>::max()
                       : -std::numeric_limits<double>::max(),
            0.0};
  }
  const double t = mean / (sd / std::sqrt(static_cast<double>(k)));
  const double v = static_cast<double>(k - 1);
  const double x = v / (v + t * t);
  const double p = regularized_incomplete_beta(v / 2.0, 0.5, x);
  return {t, p};
}

TTestMatrix ttest_matrix(
    std::span<const std::pair<std::string, std::vector<double>>> series) {
  if (series.empty()) {
    throw InputError("ttest_matrix: no series");
  }
  TTestMatrix out;
  const std::size_t n = series.size();
  out.labels.reserve(n);
  for (const auto& [label, values] : series) out.labels.push_back(label);
  out.t.assign(n, std::vector<double>(n, 0.0));
  out.p.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const TTestResult r = paired_ttest(series[i].second, series[j].second);
      out.t[i][j] = r.t;
      out.t[j][i] = -r.t;
      out.p[i][j] = r.p;
      out.p[j][i] = r.p;
    }
  }
  return out;
}

}  // namespace capstext::evalkit
