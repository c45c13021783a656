#include "bbwm/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bbwm/prf.hpp"
#include "bbwm/special.hpp"

namespace bbwm {

namespace {

constexpr double kTokenPFloor = 1e-300;
constexpr double kNudge = 1e-15;

}  // namespace

std::string_view to_string(DetectMethod method) {
  switch (method) {
    case DetectMethod::SumPValue: return "sum";
    case DetectMethod::FisherPValue: return "fisher";
    case DetectMethod::GammaLRT: return "gamma-lrt";
    case DetectMethod::KdeLRT: return "kde-lrt";
    case DetectMethod::Recursive: return "recursive";
    case DetectMethod::AaronsonRaw: return "aaronson-raw";
    case DetectMethod::AaronsonFisher: return "aaronson-fisher";
    case DetectMethod::AaronsonSum: return "aaronson-sum";
    case DetectMethod::Kirchenbauer: return "kirchenbauer";
  }
  return "unknown";
}

std::vector<Seed> unique_seeds(std::span<const Token> tokens, Key key, std::size_t n) {
  if (tokens.empty()) throw std::invalid_argument("detect: empty token sequence");
  // Set semantics; distinct n-grams colliding under SHA-256 is ignored.
  std::vector<Seed> seeds;
  seeds.reserve(tokens.size());
  for (const auto& w : extract_ngrams(tokens, n, 0)) seeds.push_back(hash_ngram(key, w));
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  return seeds;
}

std::vector<double> prf_values(const ScoreDistribution& dist, std::span<const Token> tokens,
                               Key key, std::size_t n) {
  const auto seeds = unique_seeds(tokens, key, n);
  std::vector<double> values;
  values.reserve(seeds.size());
  for (Seed s : seeds) values.push_back(prf_draw(dist, s));
  return values;
}

DetectionReport sum_pvalue_from_values(const ScoreDistribution& dist,
                                       std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("detect: no PRF values");
  double sum = 0.0;
  for (double r : values) sum += r;
  const auto t = static_cast<unsigned>(values.size());
  DetectionReport report;
  report.method = DetectMethod::SumPValue;
  report.t_unique = values.size();
  report.score = dist.sum_cdf(t, sum);
  report.p_value = dist.sum_sf(t, sum);
  report.log_p_value = dist.sum_log_sf(t, sum);
  return report;
}

DetectionReport fisher_pvalue_from_values(const ScoreDistribution& dist,
                                          std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("detect: no PRF values");
  double y = 0.0;
  for (double r : values) {
    // F(R) is nudged into the open interval; the survival is floored.
    const double q = std::clamp(dist.sf(r), kTokenPFloor, 1.0 - kNudge);
    y -= 2.0 * std::log(q);
  }
  const double dof = 2.0 * static_cast<double>(values.size());
  DetectionReport report;
  report.method = DetectMethod::FisherPValue;
  report.t_unique = values.size();
  report.score = special::chi2_cdf(dof, y);
  report.p_value = special::chi2_sf(dof, y);
  report.log_p_value = special::chi2_log_sf(dof, y);
  return report;
}

DetectionReport detect(const ScoreDistribution& dist, std::span<const Token> tokens, Key key,
                       std::size_t n) {
  return sum_pvalue_from_values(dist, prf_values(dist, tokens, key, n));
}

DetectionReport detect_fisher(const ScoreDistribution& dist, std::span<const Token> tokens,
                              Key key, std::size_t n) {
  return fisher_pvalue_from_values(dist, prf_values(dist, tokens, key, n));
}

DetectionReport detect_recursive(const ScoreDistribution& dist, std::span<const Token> tokens,
                                 std::span<const Key> keys, std::size_t n) {
  if (keys.empty()) throw std::invalid_argument("detect_recursive: no keys");
  std::vector<Key> sorted(keys.begin(), keys.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("detect_recursive: keys must be pairwise distinct");
  }

  DetectionReport report;
  report.method = DetectMethod::Recursive;
  std::vector<double> p_values;
  p_values.reserve(keys.size());
  for (Key key : keys) {
    const auto single = detect(dist, tokens, key, n);
    // Clamp to the smallest positive double so the log stays finite.
    const double p = std::max(*single.p_value, std::numeric_limits<double>::denorm_min());
    p_values.push_back(p);
    report.per_key.push_back({key, p});
    report.t_unique = single.t_unique;
  }
  if (keys.size() == 1) {
    // chi^2_2 CDF of -2 log p is 1 - p; return the single-key values as is.
    const auto single = detect(dist, tokens, keys.front(), n);
    report.score = single.score;
    report.p_value = single.p_value;
    report.log_p_value = single.log_p_value;
    return report;
  }
  double y = 0.0;
  for (double p : p_values) y -= 2.0 * std::log(p);
  const double dof = 2.0 * static_cast<double>(p_values.size());
  report.score = fisher_combine(p_values);
  report.p_value = fisher_combine_pvalue(p_values);
  report.log_p_value = special::chi2_log_sf(dof, y);
  return report;
}

void GammaLrtParams::validate() const {
  if (k < 1) throw std::invalid_argument("gamma lrt: k must be >= 1");
  if (!(m >= 1.0)) throw std::invalid_argument("gamma lrt: m must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("gamma lrt: beta must be positive");
}

double gamma_lrt_q(const GammaLrtParams& params, double T, double t) {
  return (T * std::log(params.m) / params.k - t) / ((params.m - 1.0) * params.beta);
}

double gamma_lrt_fpr(const GammaLrtParams& params, double T) {
  params.validate();
  // m = 1: the score is identically 0.
  if (params.m == 1.0) return params.t_thresh < 0.0 ? 1.0 : 0.0;
  return reg_gamma_cdf(T / params.k, params.beta, gamma_lrt_q(params, T, params.t_thresh));
}

double gamma_lrt_fnr(const GammaLrtParams& params, double T) {
  params.validate();
  if (params.m == 1.0) return params.t_thresh < 0.0 ? 0.0 : 1.0;
  return reg_gamma_sf(T / params.k, params.m * params.beta,
                      gamma_lrt_q(params, T, params.t_thresh));
}

double gamma_lrt_threshold(const GammaLrtParams& params, double T, double target_fpr) {
  params.validate();
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    throw std::invalid_argument("gamma lrt: target FPR must lie in (0, 1)");
  }
  if (params.m == 1.0) return 0.0;
  const double q = special::gamma_p_inv(T / params.k, target_fpr) / params.beta;
  return T * std::log(params.m) / params.k - (params.m - 1.0) * params.beta * q;
}

DetectionReport detect_lrt_gamma(const GammaLrtParams& params, const ScoreDistribution& dist,
                                 std::span<const Token> tokens, Key key, std::size_t n) {
  params.validate();
  if (dist.family() != Family::NegGamma || dist.k_hint() != params.k ||
      dist.beta() != params.beta) {
    throw std::invalid_argument("gamma lrt: requires F = -Gamma(1/k, beta) matching the params");
  }
  const auto values = prf_values(dist, tokens, key, n);
  double sum = 0.0;
  for (double r : values) sum += r;
  const double T = static_cast<double>(values.size());

  DetectionReport report;
  report.method = DetectMethod::GammaLRT;
  report.t_unique = values.size();
  report.score = T * std::log(params.m) / params.k + (params.m - 1.0) * params.beta * sum;
  // FPR at threshold = observed score; Q(score) = -sum R.
  const double shape = T / params.k;
  report.p_value = reg_gamma_cdf(shape, params.beta, -sum);
  report.log_p_value = special::log_gamma_p(shape, -params.beta * sum);
  return report;
}

DensityEstimate estimate_f1(const ScoreDistribution& dist, std::size_t k, std::size_t m,
                            std::size_t n_samples, std::mt19937_64& rng) {
  if (n_samples < 1000) throw std::invalid_argument("estimate_f1: need at least 1000 samples");
  if (k < 1 || m < 1) throw std::invalid_argument("estimate_f1: k and m must be >= 1");
  std::vector<double> out;
  out.reserve(n_samples);
  std::vector<double> row(k);
  for (std::size_t s = 0; s < n_samples; ++s) {
    double best_sum = -std::numeric_limits<double>::infinity();
    double best_first = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      double sum = 0.0;
      for (auto& v : row) {
        v = dist.sample(rng);
        sum += v;
      }
      if (sum > best_sum) {
        best_sum = sum;
        best_first = row.front();
      }
    }
    out.push_back(best_first);
  }
  return DensityEstimate::fit(out);
}

DensityEstimate estimate_f0(const ScoreDistribution& dist, std::size_t n_samples,
                            std::mt19937_64& rng) {
  if (n_samples < 1000) throw std::invalid_argument("estimate_f0: need at least 1000 samples");
  std::vector<double> out(n_samples);
  for (auto& v : out) v = dist.sample(rng);
  return DensityEstimate::fit(out);
}

double kde_lrt_score(const DensityEstimate& f0, const DensityEstimate& f1,
                     std::span<const double> values) {
  double score = 0.0;
  for (double r : values) score += f1.log_eval(r) - f0.log_eval(r);
  return score;
}

DetectionReport detect_lrt_kde(const ScoreDistribution& dist, const DensityEstimate& f0,
                               const DensityEstimate& f1, std::span<const Token> tokens, Key key,
                               std::size_t n) {
  const auto values = prf_values(dist, tokens, key, n);
  DetectionReport report;
  report.method = DetectMethod::KdeLRT;
  report.t_unique = values.size();
  report.score = kde_lrt_score(f0, f1, values);
  return report;
}

}  // namespace bbwm
