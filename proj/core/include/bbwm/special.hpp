#pragma once

// Scalar special functions backing the score distributions: the standard
// normal, the regularized incomplete gamma pair P/Q with their inverses, and
// the Irwin-Hall CDF. Everything here is a pure function of its arguments.

namespace bbwm::special {

// Largest Irwin-Hall order evaluated with the exact alternating sum. Above
// this the Normal(t/2, t/12) approximation is used.
inline constexpr unsigned kIrwinHallExactMax = 40;

double normal_pdf(double x);
double normal_cdf(double x);
double normal_sf(double x);
double normal_log_cdf(double x);
double normal_log_sf(double x);

// Inverse of normal_cdf. Acklam's rational approximation polished against
// the CDF (in log space deep in the lower tail). Returns -inf and +inf at 0
// and 1, NaN outside [0, 1].
double normal_quantile(double p);

// Regularized lower/upper incomplete gamma functions P(a, x), Q(a, x).
// Series expansion for x < a + 1, Lentz continued fraction otherwise; the
// complementary value is derived from whichever branch converged.
double gamma_p(double a, double x);
double gamma_q(double a, double x);
double log_gamma_p(double a, double x);
double log_gamma_q(double a, double x);

// x such that P(a, x) = p (resp. Q(a, x) = q). Safeguarded Newton iteration
// on log x, so tiny shapes (a ~ 1/k for k up to a few hundred) resolve
// quantiles that sit many decades below 1.
double gamma_p_inv(double a, double p);
double gamma_q_inv(double a, double q);

// Log density of Gamma(shape, rate) at x > 0.
double gamma_log_pdf(double shape, double rate, double x);

struct IrwinHallValue {
  double value;
  bool exact;  // false when the Normal approximation branch was taken
};

// CDF of the sum of t independent U(0,1) variables.
IrwinHallValue irwin_hall_cdf(unsigned t, double x);
// Upper tail 1 - CDF, evaluated without cancellation on the exact branch.
IrwinHallValue irwin_hall_sf(unsigned t, double x);

// Chi-squared with `dof` degrees of freedom, via the gamma pair.
double chi2_cdf(double dof, double x);
double chi2_sf(double dof, double x);
double chi2_log_sf(double dof, double x);

}  // namespace bbwm::special
