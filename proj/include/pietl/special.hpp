#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace pietl {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log Gamma(a + n) - log Gamma(a) for a > 0 and integer n >= 0.
// Short runs use the rising product, which is both faster and more accurate
// than differencing two large log-gamma values.
inline double log_rising(double a, long n) {
  if (n <= 0) return 0.0;
  if (n <= 12) {
    double prod = a;
    for (long j = 1; j < n; ++j) prod *= (a + static_cast<double>(j));
    return std::log(prod);
  }
  return std::lgamma(a + static_cast<double>(n)) - std::lgamma(a);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

namespace detail {

// Series expansion of the regularized lower incomplete gamma P(a, x), x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction (modified Lentz) for the regularized upper incomplete
// gamma Q(a, x), x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
inline double gamma_q(double a, double x) {
  if (a <= 0.0) throw std::domain_error("gamma_q: shape must be positive");
  if (x < 0.0) throw std::domain_error("gamma_q: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

// Upper tail Pr(X >= stat) of a chi-squared variable with `df` degrees of freedom.
inline double chi2_upper_tail(double stat, int df) {
  if (df <= 0) return 1.0;
  if (stat <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * stat);
}

}  // namespace pietl
