#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bbwm/baselines.hpp"
#include "bbwm/detector.hpp"
#include "bbwm/encoder.hpp"
#include "bbwm/harness.hpp"
#include "bbwm/sampler.hpp"

namespace bbwm {

enum class Scheme { Ours, Aaronson, Kirchenbauer };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);
DetectMethod parse_detect_method(std::string_view name);

// One paired experiment: `trials` watermarked texts and `trials` plain
// texts from the same mock model, optionally attacked, scored by each
// method on the full text and on every truncation length.
struct BenchScenario {
  std::string name = "dummy-lm";
  Scheme scheme = Scheme::Ours;
  SamplerSpec sampler;
  WatermarkConfig watermark;
  KirchenbauerConfig kirchenbauer;
  std::size_t trials = 200;
  std::size_t prompt_len = 0;
  double attack_pct = 0.0;
  std::vector<std::size_t> lengths;
  // Empty: sum (flat) or recursive (several keys) for Ours, the sum-corrected
  // variant for Aaronson, the z-score for Kirchenbauer.
  std::vector<DetectMethod> methods;
  std::size_t kde_samples = 20000;
  std::vector<double> pauc_fprs{0.1};
  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;

  void validate() const;
  std::vector<DetectMethod> resolved_methods() const;
};

// The appendix example: random 100-token vocabulary, empty prompt, k = 20,
// max_len = 100, n = 4, 200 trials. Flat uses m = 64; recursive uses keys
// 1..6 with fan-out 2.
BenchScenario dummy_lm_scenario(bool recursive);

struct BenchCell {
  DetectMethod method;
  std::optional<std::size_t> length;  // nullopt: full text
  bool pooled = false;                // mixed-length pool over `lengths`
  std::size_t n_neg = 0;
  std::size_t n_pos = 0;
  double auc = 0.0;
  std::vector<double> pauc;  // aligned with scenario.pauc_fprs
  double mean_t_unique = 0.0;
  // Fraction of null texts with p <= 0.01 (methods reporting a p-value).
  std::optional<double> null_rate_p01;
};

struct BenchResult {
  BenchScenario scenario;
  std::vector<BenchCell> cells;
  // Full-text scores per method, kept for downstream analysis.
  std::vector<std::vector<double>> neg_scores;
  std::vector<std::vector<double>> pos_scores;
};

BenchResult end_to_end_bench(const BenchScenario& scenario);

void write_table(std::ostream& os, const BenchResult& result);
void write_csv(std::ostream& os, const BenchResult& result);

}  // namespace bbwm
