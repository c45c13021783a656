#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>

namespace bbwm {

enum class Family { Uniform01, StdNormal, NegGamma, ChiSq2 };

std::string_view to_string(Family family);

// The per-draw distribution F of pseudorandom values together with its
// t-fold i.i.d. sum F_t:
//
//   Uniform01       F = U(0,1)                  F_t = Irwin-Hall(t)
//   StdNormal       F = N(0,1)                  F_t = N(0, t)
//   NegGamma(k, b)  F = -Gamma(1/k, rate b)     F_t = -Gamma(t/k, rate b)
//   ChiSq2          F = chi^2_2                 F_t = chi^2_{2t}
//
// ChiSq2 is treated as Gamma(1, rate 1/2) so it shares the gamma code.
class ScoreDistribution {
 public:
  static ScoreDistribution uniform();
  static ScoreDistribution normal();
  static ScoreDistribution neg_gamma(unsigned k, double beta = 1.0);
  static ScoreDistribution chi_sq2();

  // Accepts "uniform", "normal", "chisq2", "neg-gamma" (optionally with
  // explicit k and beta given separately).
  static ScoreDistribution parse(std::string_view name, unsigned k = 1, double beta = 1.0);

  Family family() const { return family_; }
  double beta() const { return beta_; }
  unsigned k_hint() const { return k_hint_; }
  std::string name() const;

  double cdf(double x) const;
  double sf(double x) const;
  double log_cdf(double x) const;
  double log_sf(double x) const;
  double log_pdf(double x) const;

  // F^{-1}(p). Unbounded tails are clamped to the 1e-300 quantile.
  double inverse_cdf(double p) const;

  // Maps a uniform u in [0, 1) to a draw from F. For NegGamma this is
  // -Gamma^{-1}(u) / beta (so u = 0 lands on the support maximum 0); the
  // other families use inverse_cdf(u).
  double from_uniform(double u) const;

  // An ordinary (non-keyed) random draw from F, for simulation.
  double sample(std::mt19937_64& rng) const;

  // CDF of the sum of t i.i.d. draws. Throws std::invalid_argument on t = 0.
  double sum_cdf(unsigned t, double x) const;
  double sum_sf(unsigned t, double x) const;
  double sum_log_sf(unsigned t, double x) const;

  friend bool operator==(const ScoreDistribution&, const ScoreDistribution&) = default;

 private:
  ScoreDistribution(Family family, double beta, unsigned k_hint)
      : family_(family), beta_(beta), k_hint_(k_hint) {}

  double gamma_shape() const;

  Family family_;
  double beta_;
  unsigned k_hint_;
};

// Regularized lower incomplete gamma P(shape, rate * x) for x >= 0, 0 below.
double reg_gamma_cdf(double shape, double rate, double x);
double reg_gamma_sf(double shape, double rate, double x);

// Fisher's method. Returns the chi^2_{2t} CDF of -2 sum log p_i, i.e. the
// detection score; the combined p-value is one minus it (see
// fisher_combine_pvalue for the accurate complement). Every p_i must lie in
// (0, 1]; zero is rejected since -log 0 overflows.
double fisher_combine(std::span<const double> p_values);
double fisher_combine_pvalue(std::span<const double> p_values);

}  // namespace bbwm
