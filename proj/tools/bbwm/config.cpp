#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bbwm::cli {

namespace {

void check_fields(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument(path + ": expected an object");
  for (const auto& [name, value] : j.items()) {
    if (!allowed.contains(name)) throw std::invalid_argument("unknown config field " + path + "." + name);
  }
}

template <class T>
void read(const json& j, const char* name, const std::string& path, T& out) {
  if (!j.contains(name)) return;
  try {
    const auto& v = j.at(name);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
      if (std::is_unsigned_v<T> && !v.is_number_unsigned()) {
        throw std::invalid_argument("expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("expected a string");
    }
    out = v.get<T>();
  } catch (const std::exception& e) {
    throw std::invalid_argument("config field " + path + "." + name + ": " + e.what());
  }
}

void apply_dist(DistSpec& dist, const json& j) {
  check_fields(j, "dist", {"name", "k", "beta"});
  read(j, "name", "dist", dist.name);
  read(j, "k", "dist", dist.k);
  read(j, "beta", "dist", dist.beta);
  dist.resolve();
}

void apply_watermark(WatermarkConfig& w, const json& j) {
  check_fields(j, "watermark",
               {"m", "n", "k", "max_len", "rng_seed", "sample_budget", "sampling_threads"});
  read(j, "m", "watermark", w.m);
  read(j, "n", "watermark", w.n);
  read(j, "k", "watermark", w.k);
  read(j, "max_len", "watermark", w.max_len);
  read(j, "rng_seed", "watermark", w.rng_seed);
  read(j, "sample_budget", "watermark", w.sample_budget);
  read(j, "sampling_threads", "watermark", w.sampling_threads);
}

void apply_sampler(SamplerSpec& s, const json& j) {
  check_fields(j, "sampler",
               {"backend", "vocab_size", "rng_seed", "zipf_exponent", "markov_temperature",
                "markov_seed", "variable_length", "url", "command", "max_in_flight",
                "retry_attempts", "retry_backoff_ms"});
  std::string backend(to_string(s.backend));
  read(j, "backend", "sampler", backend);
  s.backend = parse_backend(backend);
  read(j, "vocab_size", "sampler", s.vocab_size);
  read(j, "rng_seed", "sampler", s.rng_seed);
  read(j, "zipf_exponent", "sampler", s.zipf_exponent);
  read(j, "markov_temperature", "sampler", s.markov_temperature);
  read(j, "markov_seed", "sampler", s.markov_seed);
  read(j, "variable_length", "sampler", s.variable_length);
  read(j, "url", "sampler", s.url);
  read(j, "command", "sampler", s.command);
  read(j, "max_in_flight", "sampler", s.max_in_flight);
  read(j, "retry_attempts", "sampler", s.retry_attempts);
  read(j, "retry_backoff_ms", "sampler", s.retry_backoff_ms);
}

void apply_kirchenbauer(KirchenbauerConfig& c, const json& j) {
  check_fields(j, "kirchenbauer", {"gamma", "delta"});
  read(j, "gamma", "kirchenbauer", c.gamma);
  read(j, "delta", "kirchenbauer", c.delta);
}

json dist_json(const DistSpec& d) { return {{"name", d.name}, {"k", d.k}, {"beta", d.beta}}; }

json watermark_json(const WatermarkConfig& w) {
  return {{"m", w.m},
          {"n", w.n},
          {"k", w.k},
          {"max_len", w.max_len},
          {"rng_seed", w.rng_seed},
          {"sample_budget", w.sample_budget},
          {"sampling_threads", w.sampling_threads}};
}

json sampler_json(const SamplerSpec& s) {
  return {{"backend", std::string(to_string(s.backend))},
          {"vocab_size", s.vocab_size},
          {"rng_seed", s.rng_seed},
          {"zipf_exponent", s.zipf_exponent},
          {"markov_temperature", s.markov_temperature},
          {"markov_seed", s.markov_seed},
          {"variable_length", s.variable_length},
          {"url", s.url},
          {"command", s.command},
          {"max_in_flight", s.max_in_flight},
          {"retry_attempts", s.retry_attempts},
          {"retry_backoff_ms", s.retry_backoff_ms}};
}

json kirchenbauer_json(const KirchenbauerConfig& c) {
  return {{"gamma", c.gamma}, {"delta", c.delta}};
}

}  // namespace

void apply_json(RunConfig& config, const json& j) {
  check_fields(j, "config",
               {"dist", "watermark", "sampler", "method", "kirchenbauer", "kde_samples", "threads",
                "rng_seed"});
  if (j.contains("dist")) apply_dist(config.dist, j.at("dist"));
  if (j.contains("watermark")) apply_watermark(config.watermark, j.at("watermark"));
  if (j.contains("sampler")) apply_sampler(config.sampler, j.at("sampler"));
  if (j.contains("kirchenbauer")) apply_kirchenbauer(config.kirchenbauer, j.at("kirchenbauer"));
  std::string method(to_string(config.method));
  read(j, "method", "config", method);
  config.method = parse_detect_method(method);
  read(j, "kde_samples", "config", config.kde_samples);
  read(j, "threads", "config", config.threads);
  read(j, "rng_seed", "config", config.rng_seed);
}

json to_json(const RunConfig& config) {
  return {{"dist", dist_json(config.dist)},
          {"watermark", watermark_json(config.watermark)},
          {"sampler", sampler_json(config.sampler)},
          {"method", std::string(to_string(config.method))},
          {"kirchenbauer", kirchenbauer_json(config.kirchenbauer)},
          {"kde_samples", config.kde_samples},
          {"threads", config.threads},
          {"rng_seed", config.rng_seed}};
}

void apply_bench_json(BenchScenario& s, DistSpec& dist, const json& j) {
  check_fields(j, "bench",
               {"name", "scheme", "dist", "watermark", "sampler", "kirchenbauer", "keys", "trials",
                "prompt_len", "attack_pct", "lengths", "methods", "kde_samples", "pauc_fprs",
                "rng_seed", "threads"});
  read(j, "name", "bench", s.name);
  std::string scheme(to_string(s.scheme));
  read(j, "scheme", "bench", scheme);
  s.scheme = parse_scheme(scheme);
  if (j.contains("dist")) apply_dist(dist, j.at("dist"));
  s.watermark.dist = dist.resolve();
  if (j.contains("watermark")) apply_watermark(s.watermark, j.at("watermark"));
  if (j.contains("sampler")) apply_sampler(s.sampler, j.at("sampler"));
  if (j.contains("kirchenbauer")) apply_kirchenbauer(s.kirchenbauer, j.at("kirchenbauer"));
  // Experiment keys are public parameters of a simulation, not secrets.
  read(j, "keys", "bench", s.watermark.keys);
  read(j, "trials", "bench", s.trials);
  read(j, "prompt_len", "bench", s.prompt_len);
  read(j, "attack_pct", "bench", s.attack_pct);
  read(j, "lengths", "bench", s.lengths);
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(parse_detect_method(m.get<std::string>()));
  }
  read(j, "kde_samples", "bench", s.kde_samples);
  read(j, "pauc_fprs", "bench", s.pauc_fprs);
  read(j, "rng_seed", "bench", s.rng_seed);
  read(j, "threads", "bench", s.threads);
}

json to_json(const BenchScenario& s) {
  json methods = json::array();
  for (auto m : s.resolved_methods()) methods.push_back(std::string(to_string(m)));
  const auto& d = s.watermark.dist;
  return {{"name", s.name},
          {"scheme", std::string(to_string(s.scheme))},
          {"dist", {{"name", std::string(to_string(d.family()))}, {"k", d.k_hint()}, {"beta", d.beta()}}},
          {"watermark", watermark_json(s.watermark)},
          {"sampler", sampler_json(s.sampler)},
          {"kirchenbauer", kirchenbauer_json(s.kirchenbauer)},
          {"keys", s.watermark.keys},
          {"trials", s.trials},
          {"prompt_len", s.prompt_len},
          {"attack_pct", s.attack_pct},
          {"lengths", s.lengths},
          {"methods", methods},
          {"kde_samples", s.kde_samples},
          {"pauc_fprs", s.pauc_fprs},
          {"rng_seed", s.rng_seed},
          {"threads", s.threads}};
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
}

std::vector<Key> parse_keys(const std::string& text) {
  std::string normalized = text;
  for (char& c : normalized) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(normalized);
  std::vector<Key> keys;
  std::string word;
  while (in >> word) {
    std::size_t used = 0;
    Key key = 0;
    try {
      key = std::stoull(word, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != word.size() || word.front() == '-') {
      throw std::invalid_argument("key list: not an unsigned integer: " + word);
    }
    keys.push_back(key);
  }
  if (keys.empty()) throw std::invalid_argument("key list is empty");
  return keys;
}

std::vector<Key> load_keys(const std::optional<std::string>& key_file) {
  if (key_file) {
    std::ifstream in(*key_file);
    if (!in) throw std::runtime_error("cannot open key file " + *key_file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_keys(buffer.str());
  }
  if (const char* env = std::getenv("BBWM_KEY")) return parse_keys(env);
  throw std::invalid_argument("no key: set BBWM_KEY or pass --key-file");
}

}  // namespace bbwm::cli
