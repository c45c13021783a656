#include "bbwm/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bbwm::special {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 100000;

// log of x^a e^-x / Gamma(a), taking log x separately so that x underflow
// does not collapse the result to -inf.
double log_prefix(double a, double x, double log_x) {
  return a * log_x - x - std::lgamma(a);
}

// log P(a, x) from the power series; valid (fast) for x < a + 1.
double log_p_series(double a, double x, double log_x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return log_prefix(a, x, log_x) + std::log(sum);
}

// log Q(a, x) from the continued fraction (modified Lentz); x >= a + 1.
double log_q_cfrac(double a, double x, double log_x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return log_prefix(a, x, log_x) + std::log(h);
}

double log_p_impl(double a, double x, double log_x) {
  if (x < a + 1.0) return log_p_series(a, x, log_x);
  return std::log1p(-std::exp(log_q_cfrac(a, x, log_x)));
}

double log_q_impl(double a, double x, double log_x) {
  if (x < a + 1.0) return std::log1p(-std::exp(log_p_series(a, x, log_x)));
  return log_q_cfrac(a, x, log_x);
}

// Solves log P(a, e^y) = target (upper == false) or log Q(a, e^y) = target
// (upper == true) for y, returning e^y.
double gamma_inverse_log(double a, double target, bool upper) {
  const double lga = std::lgamma(a);
  auto eval = [&](double y) {
    const double x = std::exp(y);
    return upper ? log_q_impl(a, x, y) : log_p_impl(a, x, y);
  };
  // g is increasing in y in both cases.
  auto g = [&](double y) {
    const double v = eval(y) - target;
    return upper ? -v : v;
  };

  // Starting point: Wilson-Hilferty where it is defined, small-x expansion
  // P ~ x^a / Gamma(a+1) otherwise.
  double y0;
  {
    const double p = upper ? -std::expm1(target) : std::exp(target);
    double guess = -1.0;
    if (a > 0.5 && p > 0.0 && p < 1.0) {
      const double z = normal_quantile(p);
      const double c = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * std::sqrt(a));
      if (c > 0.0) guess = a * c * c * c;
    }
    if (guess > 0.0) {
      y0 = std::log(guess);
    } else if (!upper) {
      y0 = (target + std::lgamma(a + 1.0)) / a;
    } else {
      y0 = std::log(std::max(-target, 1e-3));
    }
  }

  double lo = y0 - 1.0;
  double hi = y0 + 1.0;
  for (double step = 1.0; g(lo) > 0.0; step *= 2.0) lo -= step;
  for (double step = 1.0; g(hi) < 0.0; step *= 2.0) hi += step;

  double y = std::clamp(y0, lo, hi);
  for (int iter = 0; iter < 300; ++iter) {
    const double x = std::exp(y);
    const double lv = eval(y);
    double gv = lv - target;
    if (upper) gv = -gv;
    if (gv == 0.0) break;
    if (gv > 0.0) hi = y; else lo = y;

    // d/dy log P = x f(x) / P; d/dy log Q = -x f(x) / Q.
    const double dlog = std::exp(a * y - x - lga - lv);
    double y_next = y - gv / dlog;
    if (!(y_next > lo && y_next < hi) || !std::isfinite(y_next)) {
      y_next = 0.5 * (lo + hi);
    }
    const bool done = std::fabs(y_next - y) <= 1e-15 * std::max(1.0, std::fabs(y));
    y = y_next;
    if (done || hi - lo <= 1e-15 * std::max(1.0, std::fabs(y))) break;
  }
  return std::exp(y);
}

// Exact Irwin-Hall lower tail for 0 < x <= t/2, extended precision with
// Neumaier compensation. With x restricted to the lower half the largest
// term stays within ~1e5 of the result for t <= 40.
double irwin_hall_lower_exact(unsigned t, double x) {
  using ld = long double;
  ld factorial = 1.0L;
  for (unsigned i = 2; i <= t; ++i) factorial *= static_cast<ld>(i);

  ld sum = 0.0L;
  ld comp = 0.0L;
  ld binom = 1.0L;
  const auto jmax = static_cast<unsigned>(std::floor(x));
  for (unsigned j = 0; j <= jmax && j <= t; ++j) {
    if (j > 0) binom = binom * static_cast<ld>(t - j + 1) / static_cast<ld>(j);
    ld term = binom * std::pow(static_cast<ld>(x) - static_cast<ld>(j), static_cast<ld>(t));
    if (j % 2 == 1) term = -term;
    const ld next = sum + term;
    if (std::fabs(sum) >= std::fabs(term)) {
      comp += (sum - next) + term;
    } else {
      comp += (term - next) + sum;
    }
    sum = next;
  }
  const ld value = (sum + comp) / factorial;
  return std::clamp(static_cast<double>(value), 0.0, 1.0);
}

}  // namespace

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_sf(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double normal_log_cdf(double x) {
  if (x > 0.0) return std::log1p(-normal_sf(x));
  if (x > -35.0) return std::log(normal_cdf(x));
  // Asymptotic Mills-ratio expansion.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(-x) + std::log(series);
}

double normal_log_sf(double x) { return normal_log_cdf(-x); }

double normal_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) return kNaN;
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;
  if (p > 0.5) return -normal_quantile(1.0 - p);

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  if (p < 1e-10) {
    // Newton on log Phi, where exp(x^2/2) would lose range.
    const double target = std::log(p);
    for (int i = 0; i < 3; ++i) {
      const double lc = normal_log_cdf(x);
      const double slope = std::exp(-0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) - lc);
      x -= (lc - target) / slope;
    }
    return x;
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double gamma_p(double a, double x) {
  if (!(a > 0.0) || std::isnan(x)) return kNaN;
  if (x <= 0.0) return 0.0;
  if (x == kInf) return 1.0;
  if (x < a + 1.0) return std::exp(log_p_series(a, x, std::log(x)));
  return -std::expm1(log_q_cfrac(a, x, std::log(x)));
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || std::isnan(x)) return kNaN;
  if (x <= 0.0) return 1.0;
  if (x == kInf) return 0.0;
  if (x < a + 1.0) return -std::expm1(log_p_series(a, x, std::log(x)));
  return std::exp(log_q_cfrac(a, x, std::log(x)));
}

double log_gamma_p(double a, double x) {
  if (!(a > 0.0) || std::isnan(x)) return kNaN;
  if (x <= 0.0) return -kInf;
  if (x == kInf) return 0.0;
  return log_p_impl(a, x, std::log(x));
}

double log_gamma_q(double a, double x) {
  if (!(a > 0.0) || std::isnan(x)) return kNaN;
  if (x <= 0.0) return 0.0;
  if (x == kInf) return -kInf;
  return log_q_impl(a, x, std::log(x));
}

double gamma_p_inv(double a, double p) {
  if (!(a > 0.0) || std::isnan(p) || p < 0.0 || p > 1.0) return kNaN;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return kInf;
  if (p < 0.5) return gamma_inverse_log(a, std::log(p), false);
  return gamma_inverse_log(a, std::log1p(-p), true);
}

double gamma_q_inv(double a, double q) {
  if (!(a > 0.0) || std::isnan(q) || q < 0.0 || q > 1.0) return kNaN;
  if (q == 1.0) return 0.0;
  if (q == 0.0) return kInf;
  if (q < 0.5) return gamma_inverse_log(a, std::log(q), true);
  return gamma_inverse_log(a, std::log1p(-q), false);
}

double gamma_log_pdf(double shape, double rate, double x) {
  if (!(x > 0.0)) return -kInf;
  return shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - std::lgamma(shape);
}

IrwinHallValue irwin_hall_cdf(unsigned t, double x) {
  if (t == 0 || std::isnan(x)) return {kNaN, false};
  const double td = static_cast<double>(t);
  if (t > kIrwinHallExactMax) {
    return {normal_cdf((x - 0.5 * td) / std::sqrt(td / 12.0)), false};
  }
  if (x <= 0.0) return {0.0, true};
  if (x >= td) return {1.0, true};
  if (x <= 0.5 * td) return {irwin_hall_lower_exact(t, x), true};
  return {1.0 - irwin_hall_lower_exact(t, td - x), true};
}

IrwinHallValue irwin_hall_sf(unsigned t, double x) {
  if (t == 0 || std::isnan(x)) return {kNaN, false};
  const double td = static_cast<double>(t);
  if (t > kIrwinHallExactMax) {
    return {normal_sf((x - 0.5 * td) / std::sqrt(td / 12.0)), false};
  }
  return irwin_hall_cdf(t, td - x);
}

double chi2_cdf(double dof, double x) { return gamma_p(0.5 * dof, 0.5 * x); }
double chi2_sf(double dof, double x) { return gamma_q(0.5 * dof, 0.5 * x); }
double chi2_log_sf(double dof, double x) { return log_gamma_q(0.5 * dof, 0.5 * x); }

}  // namespace bbwm::special
