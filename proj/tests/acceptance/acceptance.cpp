// One PASS/FAIL line per acceptance criterion. `--only N` runs a single one.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bbwm/baselines.hpp"
#include "bbwm/bench.hpp"
#include "bbwm/detector.hpp"
#include "bbwm/encoder.hpp"
#include "bbwm/harness.hpp"
#include "bbwm/prf.hpp"
#include "bbwm/score_dist.hpp"
#include "bbwm/special.hpp"
#include "bbwm/stat_tests.hpp"

using namespace bbwm;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double binom_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

TokenSeq random_text(std::mt19937_64& rng, std::size_t len) {
  std::uniform_int_distribution<Token> tok(0, (1u << 24) - 1);
  TokenSeq t(len);
  for (auto& x : t) x = tok(rng);
  return t;
}

const BenchCell& full_text_cell(const BenchResult& r) {
  for (const auto& c : r.cells) {
    if (!c.length && !c.pooled) return c;
  }
  return r.cells.front();
}

// Adaptive Simpson in long double.
long double simpson(const std::function<long double(long double)>& f, long double a, long double b,
                    long double fa, long double fm, long double fb, long double whole,
                    long double eps, int depth) {
  const long double m = (a + b) / 2, lm = (a + m) / 2, rm = (m + b) / 2;
  const long double flm = f(lm), frm = f(rm);
  const long double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const long double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15 * eps) {
    return left + right + (left + right - whole) / 15;
  }
  return simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

double integrate(const std::function<long double(long double)>& f, double a, double b) {
  const long double fa = f(a), fb = f(b), fm = f((a + b) / 2.0L);
  return static_cast<double>(
      simpson(f, a, b, fa, fm, fb, (b - a) / 6.0L * (fa + 4 * fm + fb), 1e-15L, 60));
}

// Gamma(shape) density for shape >= 1.
std::function<long double(long double)> gamma_density(double shape) {
  const long double lg = std::lgamma(static_cast<long double>(shape));
  return [shape, lg](long double t) -> long double {
    if (t <= 0) return shape == 1.0 ? 1.0L : 0.0L;
    return std::exp((shape - 1) * std::log(t) - t - lg);
  };
}

// ---------------------------------------------------------------------------

Outcome distortion_free() {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  SamplerSpec spec;
  spec.backend = Backend::MarkovMock;
  spec.vocab_size = 5;
  spec.markov_seed = 11;
  double worst_tv = 0, worst_p = 1;
  for (std::size_t k : {1u, 2u}) {
    for (std::size_t m : {2u, 4u}) {
      const auto r = distortion_check(spec, ScoreDistribution::uniform(), k, m, 4, 200000,
                                      mix_seed(k, m));
      worst_tv = std::max(worst_tv, r.tv);
      worst_p = std::min(worst_p, r.chi2_p);
      out.require(r.tv < 0.01, "tv k=" + std::to_string(k) + " m=" + std::to_string(m));
      out.require(r.chi2_p > 0.001, "chi2 k=" + std::to_string(k) + " m=" + std::to_string(m));
    }
  }
  const double elapsed = seconds_since(start);
  out.require(elapsed < 120, "runtime");
  out.detail << "max TV " << worst_tv << ", min chi2 p " << worst_p << ", " << elapsed << " s";
  return out;
}

Outcome fpr_identity() {
  Outcome out;
  const auto dist = ScoreDistribution::uniform();
  const std::vector<Key> keys{101, 102, 103, 104, 105, 106};
  const std::size_t trials = 10000;
  std::mt19937_64 rng(2024);
  std::vector<std::vector<double>> scores(3), pvalues(3);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto text = random_text(rng, 50);
    const DetectionReport r[3] = {detect(dist, text, keys[0], 4),
                                  detect_fisher(dist, text, keys[0], 4),
                                  detect_recursive(dist, text, keys, 4)};
    for (int j = 0; j < 3; ++j) {
      scores[j].push_back(r[j].score);
      pvalues[j].push_back(*r[j].p_value);
    }
  }
  const char* names[3] = {"sum", "fisher", "recursive"};
  for (int j = 0; j < 3; ++j) {
    for (double thr : {0.9, 0.95, 0.99}) {
      const double target = 1.0 - thr;
      const double fpr =
          std::count_if(scores[j].begin(), scores[j].end(), [&](double s) { return s >= thr; }) /
          double(trials);
      out.require(std::fabs(fpr - target) <= 3 * binom_sigma(target, trials),
                  std::string(names[j]) + " fpr@" + std::to_string(thr));
      if (thr == 0.99) out.detail << names[j] << " FPR@0.99 " << fpr << ", ";
    }
    const double ks = stats::ks_uniform(pvalues[j]).p_value;
    out.require(ks > 0.001, std::string(names[j]) + " KS");
    out.detail << "KS p " << ks << "; ";
  }
  return out;
}

Outcome selection_law() {
  Outcome out;
  const auto dist = ScoreDistribution::uniform();
  std::mt19937_64 rng(7), aux(8);
  const std::size_t trials = 100000;
  std::size_t first = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto a = random_text(rng, 3), b = random_text(rng, 3);
    const std::vector<TokenSeq> samples{a, b, a, a};
    const auto pool = build_pool(dist, samples, mix_seed(3, t), 4, {}, aux);
    if (pool.uniques[pool.winner] == a) ++first;
  }
  const double freq = first / double(trials);
  out.require(std::fabs(freq - 0.75) <= 0.01, "(3,1) frequency");
  out.detail << "P(count 3 wins) " << freq;

  // Random count vectors: the randomized PIT of the winner's position in the
  // cumulative count scale is uniform exactly when P(winner = i) = c_i / m.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> pit;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t m = 2 + rng() % 15;
    const std::size_t uniques = 1 + rng() % std::min<std::size_t>(m, 6);
    std::vector<std::size_t> counts(uniques, 1);
    for (std::size_t extra = uniques; extra < m; ++extra) ++counts[rng() % uniques];
    std::vector<TokenSeq> samples;
    std::vector<TokenSeq> distinct;
    for (std::size_t u = 0; u < uniques; ++u) {
      distinct.push_back(random_text(rng, 1 + rng() % 4));
      for (std::size_t c = 0; c < counts[u]; ++c) samples.push_back(distinct.back());
    }
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto pool = build_pool(dist, samples, mix_seed(4, t), 4, {}, aux);
    const auto w = std::find(distinct.begin(), distinct.end(), pool.uniques[pool.winner]) -
                   distinct.begin();
    const double below = std::accumulate(counts.begin(), counts.begin() + w, 0.0);
    pit.push_back((below + unit(rng) * counts[w]) / m);
  }
  const double ks = stats::ks_uniform(pit).p_value;
  out.require(ks > 0.001, "random count vectors");
  out.detail << ", random-count KS p " << ks;
  return out;
}

Outcome gamma_lrt_closed_form() {
  Outcome out;
  const unsigned k = 5, T = 20;
  const std::size_t m = 8, trials = 100000;
  const GammaLrtParams base{k, double(m), 1.0, 0.0};
  std::vector<double> thresholds;
  for (double f : {0.5, 0.2, 0.1, 0.05, 0.01}) thresholds.push_back(gamma_lrt_threshold(base, T, f));
  const auto r = idealized_gamma_sim(k, m, 1.0, T, trials, thresholds, 99);
  double worst = 0;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double sf = binom_sigma(r.fpr_closed[i], trials);
    const double sn = binom_sigma(r.fnr_closed[i], trials);
    const double zf = sf > 0 ? std::fabs(r.fpr[i] - r.fpr_closed[i]) / sf : 0;
    const double zn = sn > 0 ? std::fabs(r.fnr[i] - r.fnr_closed[i]) / sn : 0;
    worst = std::max({worst, zf, zn});
    out.require(zf <= 3 && zn <= 3, "threshold " + std::to_string(thresholds[i]));
  }
  const GammaLrtParams paper{50, 64.0, 1.0, 0.0};
  GammaLrtParams at = paper;
  at.t_thresh = gamma_lrt_threshold(paper, 100, 0.01);
  const double tpr = 1.0 - gamma_lrt_fnr(at, 100);
  out.require(tpr >= 0.999, "TPR at T=100");
  out.detail << "max |z| " << worst << ", TPR@1%FPR (T=100,k=50,m=64) " << tpr;
  return out;
}

Outcome auc_bound() {
  Outcome out;
  double min_margin = 1;
  for (std::size_t m : {2u, 16u, 64u}) {
    const double alpha = simulate_alpha(uniform_probs(1000), m, 5000, mix_seed(5, m));
    for (std::size_t T : {25u, 50u, 100u}) {
      BenchScenario s;
      s.name = "bound";
      s.sampler.vocab_size = 1000;
      s.sampler.rng_seed = mix_seed(m, T);
      s.watermark.keys = {77};
      s.watermark.m = m;
      s.watermark.k = 1;
      s.watermark.max_len = T;
      s.trials = 200;
      s.rng_seed = mix_seed(T, m);
      const double auc = full_text_cell(end_to_end_bench(s)).auc;
      const double bound = theorem2_bound({double(m), double(T), alpha});
      min_margin = std::min(min_margin, auc - bound);
      out.require(auc >= bound, "m=" + std::to_string(m) + " T=" + std::to_string(T));
    }
  }
  const double limit = theorem2_limit(50);
  out.require(limit >= 0.97, "limit at T=50");
  out.detail << "min AUC - bound " << min_margin << ", limit(T=50) " << limit;
  return out;
}

Outcome dummy_lm() {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  const double flat = full_text_cell(end_to_end_bench(dummy_lm_scenario(false))).auc;
  const double rec = full_text_cell(end_to_end_bench(dummy_lm_scenario(true))).auc;
  const double elapsed = seconds_since(start);
  out.require(flat > 0.95, "flat");
  out.require(rec > 0.9, "recursive");
  out.require(elapsed < 300, "runtime");
  out.detail << "flat AUC " << flat << ", recursive AUC " << rec << ", " << elapsed << " s";
  return out;
}

Outcome winner_law() {
  Outcome out;
  for (auto [k, m] : {std::pair<unsigned, std::size_t>{1, 4}, {10, 16}, {50, 32}}) {
    const auto r = idealized_gamma_sim(k, m, 1.0, k, 20000, {}, mix_seed(k, m));
    const auto law = ScoreDistribution::neg_gamma(k, double(m));
    const double p =
        stats::ks_test(r.winner_entries, [&](double x) { return law.cdf(x); }).p_value;
    out.require(p > 0.001, "k=" + std::to_string(k));
    out.detail << "(k=" << k << ",m=" << m << ") KS p " << p << " ";
  }
  return out;
}

Outcome numerics() {
  Outcome out;
  // Irwin-Hall against Monte Carlo.
  {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    const std::size_t n = 10000000;
    std::size_t below = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (int j = 0; j < 10; ++j) s += u(rng);
      below += s <= 4.0;
    }
    const double exact = special::irwin_hall_cdf(10, 4.0).value;
    const double mc = below / double(n);
    out.require(std::fabs(mc - exact) <= 4 * binom_sigma(exact, n), "Irwin-Hall MC");
    out.detail << "IH(10,4) " << exact << " vs MC " << mc;
  }
  // Regularized gamma, chi^2 and normal against quadrature.
  double worst = 0;
  for (double a : {1.0, 2.5, 10.0, 40.0}) {
    for (double x : {0.5, 2.0, 9.0, 45.0}) {
      const double q = integrate(gamma_density(a), 0.0, x);
      worst = std::max(worst, std::fabs(special::gamma_p(a, x) - q));
    }
  }
  for (double dof : {2.0, 6.0, 30.0}) {
    for (double x : {1.0, 5.0, 25.0}) {
      const auto g = gamma_density(dof / 2);
      const double q = integrate([&](long double t) { return g(t / 2) / 2; }, 0.0, x);
      worst = std::max(worst, std::fabs(special::chi2_cdf(dof, x) - q));
    }
  }
  for (double x : {-6.0, -2.0, -0.3, 0.7, 3.0}) {
    const double q = 0.5 + integrate([](long double t) {
      return std::exp(-t * t / 2) / std::sqrt(2 * std::numbers::pi_v<long double>);
    }, 0.0, x);
    worst = std::max(worst, std::fabs(special::normal_cdf(x) - q));
  }
  out.require(worst < 1e-10, "quadrature");
  out.detail << ", max quadrature error " << worst;

  // sum_cdf against empirical sums, DKW band at 1e6 samples.
  const std::size_t n = 1000000;
  const double eps = std::sqrt(std::log(2.0 / 1e-3) / (2.0 * n));
  double worst_dev = 0;
  std::mt19937_64 rng(3);
  for (unsigned t : {1u, 2u, 5u, 50u}) {
    for (const auto& dist : {ScoreDistribution::uniform(), ScoreDistribution::normal(),
                             ScoreDistribution::neg_gamma(t, 1.5), ScoreDistribution::chi_sq2()}) {
      std::vector<double> sums(n);
      for (auto& s : sums) {
        s = 0;
        for (unsigned j = 0; j < t; ++j) s += dist.sample(rng);
      }
      std::sort(sums.begin(), sums.end());
      double dev = 0;
      for (std::size_t i = 499; i < n; i += 1000) {
        const double f = dist.sum_cdf(t, sums[i]);
        dev = std::max({dev, std::fabs(f - (i + 1.0) / n), std::fabs(f - double(i) / n)});
      }
      worst_dev = std::max(worst_dev, dev);
      out.require(dev <= eps, dist.name() + " t=" + std::to_string(t));
    }
  }
  out.detail << ", max sum_cdf deviation " << worst_dev << " (band " << eps << ")";
  return out;
}

Outcome attack_direction() {
  Outcome out;
  BenchScenario s;
  s.name = "attack";
  s.sampler.vocab_size = 100;
  s.watermark.keys = {9};
  s.watermark.m = 16;
  s.watermark.k = 50;
  s.watermark.max_len = 50;
  s.trials = 500;
  s.rng_seed = 21;
  const double clean = full_text_cell(end_to_end_bench(s)).auc;
  s.attack_pct = 10;
  const double attacked = full_text_cell(end_to_end_bench(s)).auc;
  out.require(clean - attacked > 0.01, "delta");
  out.detail << "AUC " << clean << " -> " << attacked << " (delta " << clean - attacked << ")";
  return out;
}

// Context-free categorical black box with a single stream; cheaper than the
// per-call reseeding of the mocks, which matters at m = 4096.
class FastCategorical final : public Sampler {
 public:
  FastCategorical(std::vector<double> probs, std::uint64_t seed)
      : rng_(seed), draw_(probs.begin(), probs.end()) {}
  TokenSeq sample(std::span<const Token>, std::size_t) override {
    return {static_cast<Token>(draw_(rng_))};
  }

 private:
  std::mt19937_64 rng_;
  std::discrete_distribution<int> draw_;
};

Outcome baselines() {
  Outcome out;
  std::mt19937_64 rng(5);
  std::vector<double> p;
  for (int i = 0; i < 10000; ++i) {
    p.push_back(*aaronson_score(random_text(rng, 40), 31, 4, AaronsonVariant::FisherCorrected)
                     .p_value);
  }
  const double ks = stats::ks_uniform(p).p_value;
  out.require(ks > 0.001, "aaronson fisher KS");
  out.detail << "Aaronson-Fisher null KS p " << ks;

  KirchenbauerConfig kb;
  kb.key = 13;
  std::uniform_int_distribution<Token> tok(0, 31999);
  double green = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    TokenSeq t(50);
    for (auto& x : t) x = tok(rng);
    const auto r = kirchenbauer_score(t, kb, 32000);
    const double T = static_cast<double>(r.t_unique);
    green += r.score * std::sqrt(T * kb.gamma * (1 - kb.gamma)) + kb.gamma * T;
    total += T;
  }
  const double frac = green / total;
  out.require(std::fabs(frac - kb.gamma) <= 3 * binom_sigma(kb.gamma, total), "green fraction");
  out.detail << ", Kirchenbauer null green fraction " << frac;

  const std::vector<double> probs{0.3, 0.2, 0.15, 0.12, 0.1, 0.08, 0.05};
  std::vector<double> ours(probs.size(), 0.0), theirs(probs.size(), 0.0);
  const std::size_t keys = 3000;
  FastCategorical sampler(probs, 17);
  for (std::size_t key = 0; key < keys; ++key) {
    WatermarkConfig c;
    c.keys = {key};
    c.m = 4096;
    c.k = 1;
    c.max_len = 1;
    c.rng_seed = key;
    ours[Watermarker(c).generate({}, sampler).at(0)] += 1.0 / keys;
    theirs[aaronson_select(probs, TokenSeq{}, key, 4)] += 1.0 / keys;
  }
  const double tv = stats::total_variation(ours, theirs);
  out.require(tv < 0.02, "encoder vs aaronson");
  out.detail << ", encoder(k=1,m=4096) vs Aaronson TV " << tv;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: " << argv[0] << " [--only N]\n";
      return 2;
    }
  }
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, distortion_free}, {2, fpr_identity},    {3, selection_law}, {4, gamma_lrt_closed_form},
      {5, auc_bound},       {6, dummy_lm},        {7, winner_law},    {8, numerics},
      {9, attack_direction}, {10, baselines}};
  std::cout.precision(6);
  bool all = true;
  for (const auto& [id, run] : criteria) {
    if (only != 0 && id != only) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    all = all && o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail.str() << std::endl;
  }
  return all ? 0 : 1;
}
