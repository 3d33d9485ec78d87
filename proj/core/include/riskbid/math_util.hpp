#pragma once

#include <cmath>

#include "riskbid/errors.hpp"

namespace riskbid {

inline constexpr double kPi = 3.14159265358979323846;

/// Numerically stable sigmoid.
inline double sigmoid(double u) {
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

/// Inverse sigmoid, ln(y) - ln(1-y), defined on (0, 1).
inline double logit(double y) {
  return std::log(y) - std::log1p(-y);
}

inline double normal_pdf(double x, double mean, double stddev) {
  const double t = (x - mean) / stddev;
  return std::exp(-0.5 * t * t) / (stddev * std::sqrt(2.0 * kPi));
}

/// Standard normal CDF via erfc; accurate in both tails.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Composite Simpson rule with `panels` sub-intervals (rounded up to even).
template <typename F>
double simpson(F&& f, double a, double b, int panels) {
  if (panels < 2) panels = 2;
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  double odd = 0.0, even = 0.0;
  for (int i = 1; i < panels; i += 2) odd += f(a + i * h);
  for (int i = 2; i < panels; i += 2) even += f(a + i * h);
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

}  // namespace riskbid
