#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

namespace test {

// |a - b| <= tol * max(1, |b|)
inline bool close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b));
}

inline bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::fabs(b);
}

// Dvoretzky-Kiefer-Wolfowitz half-width at confidence 1 - alpha.
inline double dkw_epsilon(double n, double alpha = 0.01) {
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * n));
}

inline double binom_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace test
