#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "bbwm/kde.hpp"
#include "bbwm/score_dist.hpp"
#include "bbwm/types.hpp"

namespace bbwm {

enum class DetectMethod {
  SumPValue,
  FisherPValue,
  GammaLRT,
  KdeLRT,
  Recursive,
  AaronsonRaw,
  AaronsonFisher,
  AaronsonSum,
  Kirchenbauer,
};

std::string_view to_string(DetectMethod method);

struct KeyPValue {
  Key key;
  double p_value;
};

// Higher score means more likely watermarked. For the p-value detectors
// score = 1 - p_value; log_p_value keeps precision after 1 - score has
// rounded to zero.
struct DetectionReport {
  DetectMethod method = DetectMethod::SumPValue;
  double score = 0.0;
  std::optional<double> p_value;
  std::optional<double> log_p_value;
  std::size_t t_unique = 0;
  std::vector<KeyPValue> per_key;
};

// Seeds of the unique n-grams of `tokens` (whole sequence, no prompt
// exclusion), sorted. Throws std::invalid_argument on empty input.
std::vector<Seed> unique_seeds(std::span<const Token> tokens, Key key, std::size_t n);

// PRF values R_t of the unique n-grams.
std::vector<double> prf_values(const ScoreDistribution& dist, std::span<const Token> tokens,
                               Key key, std::size_t n);

// score = F_T(sum R_t), p = 1 - score.
DetectionReport detect(const ScoreDistribution& dist, std::span<const Token> tokens, Key key,
                       std::size_t n);

// Token-level p-values 1 - F(R_t) combined with Fisher's method.
DetectionReport detect_fisher(const ScoreDistribution& dist, std::span<const Token> tokens,
                              Key key, std::size_t n);

// Fisher combination of the per-key sum p-values.
DetectionReport detect_recursive(const ScoreDistribution& dist, std::span<const Token> tokens,
                                 std::span<const Key> keys, std::size_t n);

// ---------------------------------------------------------------------------
// Likelihood-ratio detection with F = -Gamma(1/k, beta). Under the
// no-duplicate model the null law of R is -Gamma(1/k, beta) and the
// watermarked law is -Gamma(1/k, m beta), giving
//
//   s(R) = (T/k) log m + (m - 1) beta sum R
//   FPR(t) = P(T/k, beta * Q(t)),   FNR(t) = 1 - P(T/k, m beta * Q(t))
//   Q(t) = (T log(m) / k - t) / ((m - 1) beta)
//
// with P the regularized lower incomplete gamma function.

struct GammaLrtParams {
  unsigned k = 1;
  double m = 2.0;
  double beta = 1.0;
  double t_thresh = 0.0;

  void validate() const;
};

double gamma_lrt_q(const GammaLrtParams& params, double T, double t);
double gamma_lrt_fpr(const GammaLrtParams& params, double T);
double gamma_lrt_fnr(const GammaLrtParams& params, double T);
// Threshold t with FPR(t) = target_fpr for T test tokens.
double gamma_lrt_threshold(const GammaLrtParams& params, double T, double target_fpr);

// Reports the LRT score; p_value is the FPR at a threshold equal to the
// observed score. Throws if `dist` is not the matching NegGamma family.
DetectionReport detect_lrt_gamma(const GammaLrtParams& params, const ScoreDistribution& dist,
                                 std::span<const Token> tokens, Key key, std::size_t n);

// ---------------------------------------------------------------------------
// Kernel-density LRT. f1 is learned by filling an m x k matrix with i.i.d.
// draws from F and keeping the first entry of the row with the largest sum;
// f0 from plain draws of F.

DensityEstimate estimate_f1(const ScoreDistribution& dist, std::size_t k, std::size_t m,
                            std::size_t n_samples, std::mt19937_64& rng);
DensityEstimate estimate_f0(const ScoreDistribution& dist, std::size_t n_samples,
                            std::mt19937_64& rng);

// sum_t log f1(R_t) - log f0(R_t), densities floored at 1e-12. Score only.
double kde_lrt_score(const DensityEstimate& f0, const DensityEstimate& f1,
                     std::span<const double> values);
DetectionReport detect_lrt_kde(const ScoreDistribution& dist, const DensityEstimate& f0,
                               const DensityEstimate& f1, std::span<const Token> tokens, Key key,
                               std::size_t n);

// Sum and Fisher statistics on precomputed PRF values, shared with the
// baselines and the simulators.
DetectionReport sum_pvalue_from_values(const ScoreDistribution& dist,
                                       std::span<const double> values);
DetectionReport fisher_pvalue_from_values(const ScoreDistribution& dist,
                                          std::span<const double> values);

}  // namespace bbwm
