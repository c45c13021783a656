#include "bbwm/score_dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "bbwm/special.hpp"

namespace bbwm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTailClamp = 1e-300;

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Uniform01: return "uniform";
    case Family::StdNormal: return "normal";
    case Family::NegGamma: return "neg-gamma";
    case Family::ChiSq2: return "chisq2";
  }
  return "unknown";
}

ScoreDistribution ScoreDistribution::uniform() { return {Family::Uniform01, 1.0, 1}; }
ScoreDistribution ScoreDistribution::normal() { return {Family::StdNormal, 1.0, 1}; }
ScoreDistribution ScoreDistribution::chi_sq2() { return {Family::ChiSq2, 0.5, 1}; }

ScoreDistribution ScoreDistribution::neg_gamma(unsigned k, double beta) {
  if (k == 0) throw std::invalid_argument("neg-gamma: k must be >= 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("neg-gamma: beta must be a positive finite rate");
  }
  return {Family::NegGamma, beta, k};
}

ScoreDistribution ScoreDistribution::parse(std::string_view name, unsigned k, double beta) {
  if (name == "uniform") return uniform();
  if (name == "normal") return normal();
  if (name == "chisq2" || name == "chi2") return chi_sq2();
  if (name == "neg-gamma" || name == "neggamma" || name == "gamma") return neg_gamma(k, beta);
  throw std::invalid_argument("unknown score distribution: " + std::string(name));
}

std::string ScoreDistribution::name() const {
  if (family_ == Family::NegGamma) {
    return "neg-gamma(1/" + std::to_string(k_hint_) + ", " + std::to_string(beta_) + ")";
  }
  return std::string(to_string(family_));
}

double ScoreDistribution::gamma_shape() const {
  return family_ == Family::NegGamma ? 1.0 / static_cast<double>(k_hint_) : 1.0;
}


double ScoreDistribution::cdf(double x) const {
  switch (family_) {
    case Family::Uniform01: return std::clamp(x, 0.0, 1.0);
    case Family::StdNormal: return special::normal_cdf(x);
    case Family::NegGamma: return x >= 0.0 ? 1.0 : special::gamma_q(gamma_shape(), -beta_ * x);
    case Family::ChiSq2: return x <= 0.0 ? 0.0 : -std::expm1(-0.5 * x);
  }
  return 0.0;
}

double ScoreDistribution::sf(double x) const {
  switch (family_) {
    case Family::Uniform01: return 1.0 - std::clamp(x, 0.0, 1.0);
    case Family::StdNormal: return special::normal_sf(x);
    case Family::NegGamma: return x >= 0.0 ? 0.0 : special::gamma_p(gamma_shape(), -beta_ * x);
    case Family::ChiSq2: return x <= 0.0 ? 1.0 : std::exp(-0.5 * x);
  }
  return 0.0;
}

double ScoreDistribution::log_cdf(double x) const {
  switch (family_) {
    case Family::Uniform01: return std::log(std::clamp(x, 0.0, 1.0));
    case Family::StdNormal: return special::normal_log_cdf(x);
    case Family::NegGamma:
      return x >= 0.0 ? 0.0 : special::log_gamma_q(gamma_shape(), -beta_ * x);
    case Family::ChiSq2: return x <= 0.0 ? -kInf : std::log(-std::expm1(-0.5 * x));
  }
  return 0.0;
}

double ScoreDistribution::log_sf(double x) const {
  switch (family_) {
    case Family::Uniform01: return std::log1p(-std::clamp(x, 0.0, 1.0));
    case Family::StdNormal: return special::normal_log_sf(x);
    case Family::NegGamma:
      return x >= 0.0 ? -kInf : special::log_gamma_p(gamma_shape(), -beta_ * x);
    case Family::ChiSq2: return x <= 0.0 ? 0.0 : -0.5 * x;
  }
  return 0.0;
}

double ScoreDistribution::log_pdf(double x) const {
  switch (family_) {
    case Family::Uniform01: return (x >= 0.0 && x <= 1.0) ? 0.0 : -kInf;
    case Family::StdNormal: return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
    case Family::NegGamma:
      return x < 0.0 ? special::gamma_log_pdf(gamma_shape(), beta_, -x) : -kInf;
    case Family::ChiSq2: return x > 0.0 ? std::log(0.5) - 0.5 * x : -kInf;
  }
  return -kInf;
}

double ScoreDistribution::inverse_cdf(double p) const {
  if (std::isnan(p)) return p;
  p = std::clamp(p, 0.0, 1.0);
  switch (family_) {
    case Family::Uniform01: return p;
    case Family::StdNormal:
      if (p <= kTailClamp) return special::normal_quantile(kTailClamp);
      if (p >= 1.0) return -special::normal_quantile(kTailClamp);
      return special::normal_quantile(p);
    case Family::NegGamma:
      return -special::gamma_q_inv(gamma_shape(), std::max(p, kTailClamp)) / beta_;
    case Family::ChiSq2:
      if (p >= 1.0) return -2.0 * std::log(kTailClamp);
      return -2.0 * std::log1p(-p);
  }
  return p;
}

double ScoreDistribution::from_uniform(double u) const {
  if (family_ == Family::NegGamma) {
    return -special::gamma_p_inv(gamma_shape(), u) / beta_;
  }
  return inverse_cdf(u);
}

double ScoreDistribution::sample(std::mt19937_64& rng) const {
  switch (family_) {
    case Family::Uniform01: return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    case Family::StdNormal: return std::normal_distribution<double>(0.0, 1.0)(rng);
    case Family::NegGamma:
      return -std::gamma_distribution<double>(gamma_shape(), 1.0 / beta_)(rng);
    case Family::ChiSq2: return std::exponential_distribution<double>(0.5)(rng);
  }
  return 0.0;
}

double ScoreDistribution::sum_cdf(unsigned t, double x) const {
  if (t == 0) throw std::invalid_argument("sum_cdf: t must be >= 1");
  const double td = static_cast<double>(t);
  switch (family_) {
    case Family::Uniform01: return special::irwin_hall_cdf(t, x).value;
    case Family::StdNormal: return special::normal_cdf(x / std::sqrt(td));
    case Family::NegGamma:
      return x >= 0.0 ? 1.0 : special::gamma_q(td * gamma_shape(), -beta_ * x);
    case Family::ChiSq2: return x <= 0.0 ? 0.0 : special::gamma_p(td, 0.5 * x);
  }
  return 0.0;
}

double ScoreDistribution::sum_sf(unsigned t, double x) const {
  if (t == 0) throw std::invalid_argument("sum_sf: t must be >= 1");
  const double td = static_cast<double>(t);
  switch (family_) {
    case Family::Uniform01: return special::irwin_hall_sf(t, x).value;
    case Family::StdNormal: return special::normal_sf(x / std::sqrt(td));
    case Family::NegGamma:
      return x >= 0.0 ? 0.0 : special::gamma_p(td * gamma_shape(), -beta_ * x);
    case Family::ChiSq2: return x <= 0.0 ? 1.0 : special::gamma_q(td, 0.5 * x);
  }
  return 0.0;
}

double ScoreDistribution::sum_log_sf(unsigned t, double x) const {
  if (t == 0) throw std::invalid_argument("sum_log_sf: t must be >= 1");
  const double td = static_cast<double>(t);
  switch (family_) {
    case Family::Uniform01: {
      if (t > special::kIrwinHallExactMax) {
        return special::normal_log_sf((x - 0.5 * td) / std::sqrt(td / 12.0));
      }
      if (x >= td) return -kInf;
      // Within one unit of the upper end only the leading term survives:
      // sf = (t - x)^t / t!, which may underflow as a double.
      if (td - x <= 1.0) return td * std::log(td - x) - std::lgamma(td + 1.0);
      return std::log(special::irwin_hall_sf(t, x).value);
    }
    case Family::StdNormal: return special::normal_log_sf(x / std::sqrt(td));
    case Family::NegGamma:
      return x >= 0.0 ? -kInf : special::log_gamma_p(td * gamma_shape(), -beta_ * x);
    case Family::ChiSq2: return x <= 0.0 ? 0.0 : special::log_gamma_q(td, 0.5 * x);
  }
  return 0.0;
}

double reg_gamma_cdf(double shape, double rate, double x) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("reg_gamma_cdf: shape and rate must be positive");
  }
  if (x <= 0.0) return 0.0;
  return special::gamma_p(shape, rate * x);
}

double reg_gamma_sf(double shape, double rate, double x) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("reg_gamma_sf: shape and rate must be positive");
  }
  if (x <= 0.0) return 1.0;
  return special::gamma_q(shape, rate * x);
}

namespace {

double fisher_statistic(std::span<const double> p_values) {
  if (p_values.empty()) throw std::invalid_argument("fisher_combine: empty p-value list");
  double y = 0.0;
  for (double p : p_values) {
    if (!(p > 0.0) || p > 1.0) {
      throw std::invalid_argument("fisher_combine: p-values must lie in (0, 1]");
    }
    y -= 2.0 * std::log(p);
  }
  return y;
}

}  // namespace

double fisher_combine(std::span<const double> p_values) {
  const double y = fisher_statistic(p_values);
  return special::chi2_cdf(2.0 * static_cast<double>(p_values.size()), y);
}

double fisher_combine_pvalue(std::span<const double> p_values) {
  const double y = fisher_statistic(p_values);
  return special::chi2_sf(2.0 * static_cast<double>(p_values.size()), y);
}

}  // namespace bbwm
