#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace bbwm::cli {

// Exit codes: 0 success, 1 some record failed, 2 invalid configuration.
inline constexpr int kExitRecordFailure = 1;
inline constexpr int kExitBadConfig = 2;

// Line-delimited {"id", "prompt": [ids]} in, {"id", "tokens": [ids]} out, in
// input order. `config.watermark.keys` must already hold the secret keys.
int cmd_watermark(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& log);

// Line-delimited {"id", "tokens": [ids]} in, one report per record out.
int cmd_detect(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& log);

enum class Format { Jsonl, Table, Csv };
Format parse_format(const std::string& name);

int cmd_bench(const BenchScenario& scenario, Format format, std::ostream& out);

struct AlphaArgs {
  std::string dist = "uniform";  // or "zipf"
  std::size_t vocab_size = 32000;
  double zipf_exponent = 1.0;
  std::vector<std::size_t> m{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  std::size_t trials = 1000;
  std::uint64_t rng_seed = 0;
};
int cmd_simulate_alpha(const AlphaArgs& args, std::ostream& out);

struct GammaArgs {
  unsigned k = 50;
  double m = 64;
  double beta = 1.0;
  std::vector<double> T{25, 50, 100, 150, 200, 250};
  std::vector<double> fpr{0.01};
  std::size_t mc_trials = 0;  // 0: closed form only
  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;
};
int cmd_simulate_gamma(const GammaArgs& args, std::ostream& out);

struct DistortionArgs {
  SamplerSpec sampler;
  DistSpec dist;
  std::size_t k = 1;
  std::size_t m = 2;
  std::size_t n = 4;
  std::size_t runs = 200000;
  bool fixed_key = false;
  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;
};
int cmd_simulate_distortion(const DistortionArgs& args, std::ostream& out);

int cmd_simulate_dummy_lm(std::size_t trials, std::uint64_t rng_seed, std::size_t threads,
                          Format format, std::ostream& out);

struct BoundArgs {
  double m = 64;
  double T = 50;
  std::optional<double> alpha;  // default log m
  bool limit = false;
};
int cmd_bound(const BoundArgs& args, std::ostream& out);

}  // namespace bbwm::cli
