#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "bbwm/sampler.hpp"
#include "bbwm/score_dist.hpp"
#include "bbwm/types.hpp"

namespace bbwm {

// Runs body(trial) for trial in [0, trials). Trial i goes to worker
// i % threads; callers write results by index, so any thread count yields
// the same aggregate.
template <class Body>
void parallel_trials(std::size_t trials, std::size_t threads, Body&& body) {
  if (threads <= 1 || trials <= 1) {
    for (std::size_t i = 0; i < trials; ++i) body(i);
    return;
  }
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < threads && w < trials; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < trials; i += threads) body(i);
    });
  }
}

// ---------------------------------------------------------------------------
// ROC evaluation.

struct RocPoint {
  double fpr;
  double tpr;
};

class RocCurve {
 public:
  RocCurve(std::vector<RocPoint> points, double auc) : points_(std::move(points)), auc_(auc) {}

  const std::vector<RocPoint>& points() const { return points_; }
  double auc() const { return auc_; }
  // Partial area over FPR in [0, q], McClish-standardized: 0.5 for the
  // chance diagonal, 1 for a perfect classifier. Requires q in (0, 1].
  double pauc_at(double q) const;
  double raw_partial_area(double q) const;
  // TPR at the given FPR, linearly interpolated.
  double tpr_at(double fpr) const;

 private:
  std::vector<RocPoint> points_;  // from (0, 0) to (1, 1), nondecreasing
  double auc_;
};

// Positives are expected to score higher. AUC is the Mann-Whitney statistic
// with ties counted one half.
RocCurve roc(std::span<const double> neg_scores, std::span<const double> pos_scores);

// ---------------------------------------------------------------------------
// Random-token replacement: floor(pct * len / 100) distinct positions, each
// set to a uniform token among the V - 1 others.
TokenSeq attack_replace(std::span<const Token> tokens, double pct, std::size_t vocab_size,
                        std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// AUC lower bound for flat k = 1 uniform watermarking:
//   AUC >= 1 / (1 + 1 / (3 T lambda^2 alpha^2)),
//   lambda = (1 / log m) (m / (m + 1) - 1/2).

struct BoundParams {
  double m = 2.0;
  double T = 1.0;
  double alpha = 0.0;  // nats, within [0, log m]

  double lambda() const;
  void validate() const;
};

double theorem2_lambda(double m);
double theorem2_bound(const BoundParams& params);
// m -> infinity with alpha = log m.
double theorem2_limit(double T);

// ---------------------------------------------------------------------------
// Expected entropy of the empirical distribution of m draws from p:
// mean over trials of -sum_i (c_i / m) log(c_i / m), c ~ Multinomial(m, p).
double simulate_alpha(std::span<const double> probs, std::size_t m, std::size_t trials,
                      std::uint64_t rng_seed);

std::vector<double> uniform_probs(std::size_t vocab_size);
// p_i proportional to (i + 1)^-s.
std::vector<double> zipf_probs(std::size_t vocab_size, double s);

// ---------------------------------------------------------------------------
// Gamma LRT error rates in closed form.

struct GammaRatePoint {
  double T;
  std::vector<double> fpr;        // targets
  std::vector<double> threshold;  // t* per target
  std::vector<double> tpr;
};

std::vector<GammaRatePoint> gamma_rate_curves(unsigned k, double m, double beta,
                                              std::span<const double> T_grid,
                                              std::span<const double> fpr_targets);

// Monte Carlo of the no-duplicate model: each chunk is an m x k matrix of
// i.i.d. -Gamma(1/k, beta) values, the row with the largest sum wins, and
// T test values are read off consecutive winner rows. Null texts are T
// plain draws.
struct IdealizedGammaResult {
  std::vector<double> thresholds;
  std::vector<double> fpr;         // empirical P(s >= t | null)
  std::vector<double> fnr;         // empirical P(s < t | watermarked)
  std::vector<double> fpr_closed;
  std::vector<double> fnr_closed;
  std::vector<double> null_scores;
  std::vector<double> alt_scores;
  std::vector<double> winner_entries;  // first entry of the first winner row, per trial
};

IdealizedGammaResult idealized_gamma_sim(unsigned k, std::size_t m, double beta, unsigned T,
                                         std::size_t trials, std::span<const double> thresholds,
                                         std::uint64_t rng_seed, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Output-distribution check of one watermarked chunk against the exact law
// of the mock model. Every run draws a k-token chunk from an empty prompt with
// m candidates; with fresh_keys each run uses its own key. The mock must
// return fixed-length chunks, and V^k must stay small enough to enumerate.
struct DistortionResult {
  std::vector<TokenSeq> support;
  std::vector<double> expected;  // exact probabilities
  std::vector<double> counts;    // watermarked outcomes
  double tv = 0.0;
  double chi2_stat = 0.0;
  double chi2_p = 0.0;
};

DistortionResult distortion_check(const SamplerSpec& spec, const ScoreDistribution& dist,
                                  std::size_t k, std::size_t m, std::size_t n, std::size_t runs,
                                  std::uint64_t rng_seed, bool fresh_keys = true,
                                  std::size_t threads = 1);

}  // namespace bbwm
