#include "bbwm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "bbwm/detector.hpp"
#include "bbwm/encoder.hpp"
#include "bbwm/sampler.hpp"
#include "bbwm/score_dist.hpp"
#include "bbwm/special.hpp"
#include "bbwm/stat_tests.hpp"

namespace bbwm {

double RocCurve::raw_partial_area(double q) const {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("pauc: q must lie in (0, 1]");
  double area = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const auto& a = points_[i - 1];
    const auto& b = points_[i];
    if (a.fpr >= q) break;
    if (b.fpr <= q) {
      area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    } else {
      const double tq = a.tpr + (b.tpr - a.tpr) * (q - a.fpr) / (b.fpr - a.fpr);
      area += (q - a.fpr) * (a.tpr + tq) / 2.0;
    }
  }
  return area;
}

double RocCurve::pauc_at(double q) const {
  const double area = raw_partial_area(q);
  const double chance = q * q / 2.0;
  return 0.5 * (1.0 + (area - chance) / (q - chance));
}

double RocCurve::tpr_at(double fpr) const {
  double best = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const auto& a = points_[i - 1];
    const auto& b = points_[i];
    if (b.fpr < fpr) continue;
    if (a.fpr > fpr) break;
    const double t = b.fpr == a.fpr ? b.tpr : a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr);
    best = std::max(best, t);
  }
  return best;
}

RocCurve roc(std::span<const double> neg_scores, std::span<const double> pos_scores) {
  if (neg_scores.empty() || pos_scores.empty()) {
    throw std::invalid_argument("roc: both score lists must be nonempty");
  }
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(neg_scores.size() + pos_scores.size());
  for (double s : neg_scores) items.push_back({s, false});
  for (double s : pos_scores) items.push_back({s, true});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  const double n_neg = static_cast<double>(neg_scores.size());
  const double n_pos = static_cast<double>(pos_scores.size());

  // Midranks, ascending.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t r = i; r < j; ++r) {
      if (items[r].positive) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double auc = (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);

  // Sweep the threshold downward, one point per distinct score.
  std::vector<RocPoint> points{{0.0, 0.0}};
  double fp = 0.0;
  double tp = 0.0;
  for (std::size_t i = items.size(); i > 0;) {
    std::size_t j = i;
    while (j > 0 && items[j - 1].score == items[i - 1].score) {
      --j;
      (items[j].positive ? tp : fp) += 1.0;
    }
    points.push_back({fp / n_neg, tp / n_pos});
    i = j;
  }
  return RocCurve(std::move(points), std::clamp(auc, 0.0, 1.0));
}

TokenSeq attack_replace(std::span<const Token> tokens, double pct, std::size_t vocab_size,
                        std::mt19937_64& rng) {
  if (!(pct >= 0.0 && pct <= 100.0)) throw std::invalid_argument("attack: pct must be in [0, 100]");
  TokenSeq out(tokens.begin(), tokens.end());
  const auto count = static_cast<std::size_t>(
      std::floor(pct * static_cast<double>(tokens.size()) / 100.0 + 1e-9));
  if (count == 0) return out;
  if (vocab_size < 2) throw std::invalid_argument("attack: vocabulary needs at least 2 tokens");

  std::vector<std::size_t> positions(tokens.size());
  std::iota(positions.begin(), positions.end(), 0);
  std::uniform_int_distribution<std::size_t> other(0, vocab_size - 2);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, positions.size() - 1);
    std::swap(positions[i], positions[pick(rng)]);
    const std::size_t pos = positions[i];
    if (out[pos] >= vocab_size) throw std::invalid_argument("attack: token outside vocabulary");
    auto replacement = static_cast<Token>(other(rng));
    if (replacement >= out[pos]) ++replacement;
    out[pos] = replacement;
  }
  return out;
}

double theorem2_lambda(double m) {
  if (!(m >= 2.0)) throw std::invalid_argument("bound: m must be >= 2");
  return (m / (m + 1.0) - 0.5) / std::log(m);
}

double BoundParams::lambda() const { return theorem2_lambda(m); }

void BoundParams::validate() const {
  if (!(m >= 2.0)) throw std::invalid_argument("bound: m must be >= 2");
  if (!(T >= 1.0)) throw std::invalid_argument("bound: T must be >= 1");
  if (!(alpha >= 0.0 && alpha <= std::log(m) * (1.0 + 1e-12))) {
    throw std::invalid_argument("bound: alpha must lie in [0, log m]");
  }
}

double theorem2_bound(const BoundParams& params) {
  params.validate();
  if (params.alpha == 0.0) return 0.0;
  const double la = params.lambda() * params.alpha;
  return 1.0 / (1.0 + 1.0 / (3.0 * params.T * la * la));
}

double theorem2_limit(double T) {
  if (!(T >= 1.0)) throw std::invalid_argument("bound: T must be >= 1");
  return 1.0 / (1.0 + 4.0 / (3.0 * T));
}

double simulate_alpha(std::span<const double> probs, std::size_t m, std::size_t trials,
                      std::uint64_t rng_seed) {
  if (trials < 100) throw std::invalid_argument("simulate_alpha: need at least 100 trials");
  if (m < 1) throw std::invalid_argument("simulate_alpha: m must be >= 1");
  std::discrete_distribution<std::size_t> draw(probs.begin(), probs.end());
  std::mt19937_64 rng(rng_seed);
  std::unordered_map<std::size_t, std::size_t> counts;
  const double md = static_cast<double>(m);
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    counts.clear();
    for (std::size_t i = 0; i < m; ++i) ++counts[draw(rng)];
    double h = 0.0;
    for (const auto& [token, c] : counts) {
      const double f = static_cast<double>(c) / md;
      h -= f * std::log(f);
    }
    total += h;
  }
  // Rounding can push an all-distinct draw a few ulps past log m.
  return std::min(total / static_cast<double>(trials), std::log(md));
}

std::vector<double> uniform_probs(std::size_t vocab_size) {
  if (vocab_size == 0) throw std::invalid_argument("uniform_probs: empty vocabulary");
  return std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size));
}

std::vector<double> zipf_probs(std::size_t vocab_size, double s) {
  if (vocab_size == 0) throw std::invalid_argument("zipf_probs: empty vocabulary");
  std::vector<double> p(vocab_size);
  double total = 0.0;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    p[i] = std::pow(static_cast<double>(i + 1), -s);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<GammaRatePoint> gamma_rate_curves(unsigned k, double m, double beta,
                                              std::span<const double> T_grid,
                                              std::span<const double> fpr_targets) {
  std::vector<GammaRatePoint> out;
  for (double T : T_grid) {
    if (!(T > 0.0)) throw std::invalid_argument("gamma_rate_curves: T must be positive");
    GammaRatePoint point{T, {}, {}, {}};
    for (double target : fpr_targets) {
      GammaLrtParams params{k, m, beta, 0.0};
      const double t = gamma_lrt_threshold(params, T, target);
      params.t_thresh = t;
      point.fpr.push_back(target);
      point.threshold.push_back(t);
      // With m = 1 both hypotheses coincide; the randomized test has TPR = FPR.
      point.tpr.push_back(m == 1.0 ? target : 1.0 - gamma_lrt_fnr(params, T));
    }
    out.push_back(std::move(point));
  }
  return out;
}

IdealizedGammaResult idealized_gamma_sim(unsigned k, std::size_t m, double beta, unsigned T,
                                         std::size_t trials, std::span<const double> thresholds,
                                         std::uint64_t rng_seed, std::size_t threads) {
  if (trials < 10000) throw std::invalid_argument("idealized_gamma_sim: need at least 1e4 trials");
  if (k < 1 || m < 1 || T < 1) throw std::invalid_argument("idealized_gamma_sim: k, m, T >= 1");
  const auto dist = ScoreDistribution::neg_gamma(k, beta);
  const double md = static_cast<double>(m);
  const double offset = static_cast<double>(T) * std::log(md) / k;
  const double slope = (md - 1.0) * beta;

  IdealizedGammaResult result;
  result.null_scores.resize(trials);
  result.alt_scores.resize(trials);
  result.winner_entries.resize(trials);

  parallel_trials(trials, threads, [&](std::size_t trial) {
    std::mt19937_64 rng(mix_seed(rng_seed, trial));
    std::vector<double> matrix(m * k);
    double alt_sum = 0.0;
    unsigned taken = 0;
    bool first_row = true;
    while (taken < T) {
      std::size_t best = 0;
      double best_sum = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          matrix[r * k + c] = dist.sample(rng);
          sum += matrix[r * k + c];
        }
        if (sum > best_sum) {
          best_sum = sum;
          best = r;
        }
      }
      if (first_row) {
        result.winner_entries[trial] = matrix[best * k];
        first_row = false;
      }
      for (std::size_t c = 0; c < k && taken < T; ++c, ++taken) alt_sum += matrix[best * k + c];
    }
    double null_sum = 0.0;
    for (unsigned i = 0; i < T; ++i) null_sum += dist.sample(rng);
    result.alt_scores[trial] = offset + slope * alt_sum;
    result.null_scores[trial] = offset + slope * null_sum;
  });

  const double n = static_cast<double>(trials);
  for (double t : thresholds) {
    const auto fp = std::count_if(result.null_scores.begin(), result.null_scores.end(),
                                  [t](double s) { return s >= t; });
    const auto fn = std::count_if(result.alt_scores.begin(), result.alt_scores.end(),
                                  [t](double s) { return s < t; });
    const GammaLrtParams params{k, md, beta, t};
    result.thresholds.push_back(t);
    result.fpr.push_back(static_cast<double>(fp) / n);
    result.fnr.push_back(static_cast<double>(fn) / n);
    result.fpr_closed.push_back(gamma_lrt_fpr(params, T));
    result.fnr_closed.push_back(gamma_lrt_fnr(params, T));
  }
  return result;
}

DistortionResult distortion_check(const SamplerSpec& spec, const ScoreDistribution& dist,
                                  std::size_t k, std::size_t m, std::size_t n, std::size_t runs,
                                  std::uint64_t rng_seed, bool fresh_keys, std::size_t threads) {
  if (spec.variable_length) throw std::invalid_argument("distortion: needs fixed-length chunks");
  if (k < 1 || runs < 1) throw std::invalid_argument("distortion: k and runs must be >= 1");
  const auto model = make_mock_sampler(spec);
  const std::size_t V = model->vocab_size();
  double cells = 1.0;
  for (std::size_t i = 0; i < k; ++i) cells *= static_cast<double>(V);
  if (cells > 1e6) throw std::invalid_argument("distortion: V^k too large to enumerate");

  DistortionResult result;
  const auto total = static_cast<std::size_t>(cells);
  result.support.reserve(total);
  result.expected.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    TokenSeq seq(k);
    std::size_t rest = code;
    for (std::size_t i = k; i > 0; --i) {
      seq[i - 1] = static_cast<Token>(rest % V);
      rest /= V;
    }
    double p = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      p *= model->next_token_probs(std::span<const Token>(seq.data(), i))[seq[i]];
    }
    result.support.push_back(std::move(seq));
    result.expected.push_back(p);
  }

  std::vector<std::size_t> outcome(runs);
  parallel_trials(runs, threads, [&](std::size_t run) {
    SamplerSpec local = spec;
    local.rng_seed = mix_seed(spec.rng_seed ^ rng_seed, run);
    auto sampler = make_mock_sampler(local);
    WatermarkConfig config;
    config.dist = dist;
    config.m = m;
    config.n = n;
    config.k = k;
    config.max_len = k;
    config.keys = {fresh_keys ? mix_seed(rng_seed, run) : rng_seed};
    config.rng_seed = mix_seed(~rng_seed, run);
    Watermarker marker(config);
    const auto chunk = marker.watermark_single(config.keys.front(), {}, {}, *sampler, k);
    std::size_t code = 0;
    for (Token t : chunk) code = code * V + t;
    outcome[run] = code;
  });

  result.counts.assign(total, 0.0);
  for (std::size_t code : outcome) result.counts[code] += 1.0;
  std::vector<double> freq(total);
  for (std::size_t i = 0; i < total; ++i) freq[i] = result.counts[i] / static_cast<double>(runs);
  result.tv = stats::total_variation(freq, result.expected);
  const auto gof = stats::chi_square_gof(result.counts, result.expected);
  result.chi2_stat = gof.statistic;
  result.chi2_p = gof.p_value;
  return result;
}

}  // namespace bbwm
