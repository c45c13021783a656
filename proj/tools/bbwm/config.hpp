#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbwm/baselines.hpp"
#include "bbwm/bench.hpp"
#include "bbwm/detector.hpp"
#include "bbwm/encoder.hpp"
#include "bbwm/sampler.hpp"

namespace bbwm::cli {

using nlohmann::json;

struct DistSpec {
  std::string name = "uniform";
  unsigned k = 1;
  double beta = 1.0;

  ScoreDistribution resolve() const { return ScoreDistribution::parse(name, k, beta); }
};

// Everything the watermark and detect subcommands need. Keys are not part
// of the file format; they come from load_keys.
struct RunConfig {
  DistSpec dist;
  WatermarkConfig watermark;
  SamplerSpec sampler;
  DetectMethod method = DetectMethod::SumPValue;
  KirchenbauerConfig kirchenbauer;
  std::size_t kde_samples = 20000;
  std::size_t threads = 1;
  std::uint64_t rng_seed = 0;
};

// Section readers reject unknown fields and type mismatches with
// std::invalid_argument naming the offending path.
void apply_json(RunConfig& config, const json& j);
json to_json(const RunConfig& config);

void apply_bench_json(BenchScenario& scenario, DistSpec& dist, const json& j);
json to_json(const BenchScenario& scenario);

json load_json_file(const std::string& path);

// Secret keys: decimal or 0x-prefixed integers separated by commas or
// whitespace, read from `key_file` when given, else from $BBWM_KEY.
std::vector<Key> parse_keys(const std::string& text);
std::vector<Key> load_keys(const std::optional<std::string>& key_file);

}  // namespace bbwm::cli
