#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace bbwm;
using namespace bbwm::cli;

namespace {

struct Streams {
  std::string input = "-";
  std::string output = "-";
  std::unique_ptr<std::ifstream> in_file;
  std::unique_ptr<std::ofstream> out_file;

  std::istream& in() {
    if (input == "-") return std::cin;
    in_file = std::make_unique<std::ifstream>(input);
    if (!*in_file) throw std::runtime_error("cannot open " + input);
    return *in_file;
  }
  std::ostream& out() {
    if (output == "-") return std::cout;
    out_file = std::make_unique<std::ofstream>(output);
    if (!*out_file) throw std::runtime_error("cannot write " + output);
    return *out_file;
  }
};

// Flags that mirror RunConfig fields; set only when given, so they override
// the config file.
struct RunFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> key_file;
  std::optional<std::string> dist;
  std::optional<unsigned> dist_k;
  std::optional<double> beta;
  std::optional<std::size_t> m, n, k, max_len, vocab, threads, sampling_threads;
  std::optional<std::uint64_t> rng_seed, sampler_seed, sample_budget;
  std::optional<std::string> backend, url, command, method;

  void add(CLI::App* app, bool detect) {
    app->add_option("--config", config_file, "JSON config file");
    app->add_option("--key-file", key_file, "File holding the secret key(s); default $BBWM_KEY");
    app->add_option("--dist", dist, "Score distribution: uniform, normal, neg-gamma, chisq2 [uniform]");
    app->add_option("--dist-k", dist_k, "neg-gamma shape parameter k [1]");
    app->add_option("--beta", beta, "neg-gamma rate [1]");
    app->add_option("--m", m, "Candidates per selection [2]");
    app->add_option("--n", n, "n-gram length [4]");
    app->add_option("--k", k, "Tokens per chunk [20]");
    app->add_option("--max-len", max_len, "Token budget per generation [100]");
    app->add_option("--vocab", vocab, "Mock vocabulary size [100]");
    app->add_option("--threads", threads, "Records processed concurrently [1]");
    app->add_option("--rng-seed", rng_seed, "Seed for auxiliary randomness [0]");
    if (detect) {
      app->add_option("--method", method,
                      "sum, fisher, recursive, gamma-lrt, kde-lrt, aaronson-raw, aaronson-fisher, "
                      "aaronson-sum, kirchenbauer [sum]");
    } else {
      app->add_option("--backend", backend, "uniform, zipf, markov, subprocess, http [uniform]");
      app->add_option("--sampler-seed", sampler_seed, "Mock sampler seed [0]");
      app->add_option("--url", url, "Http backend endpoint");
      app->add_option("--command", command, "Subprocess backend command line");
      app->add_option("--sample-budget", sample_budget, "Cap on m^t raw calls per chunk [65536]");
      app->add_option("--sampling-threads", sampling_threads, "Concurrent sampler calls per chunk [1]");
    }
  }

  RunConfig resolve() const {
    RunConfig c;
    if (config_file) apply_json(c, load_json_file(*config_file));
    if (dist) c.dist.name = *dist;
    if (dist_k) c.dist.k = *dist_k;
    if (beta) c.dist.beta = *beta;
    if (m) c.watermark.m = *m;
    if (n) c.watermark.n = *n;
    if (k) c.watermark.k = *k;
    if (max_len) c.watermark.max_len = *max_len;
    if (vocab) c.sampler.vocab_size = *vocab;
    if (threads) c.threads = *threads;
    if (rng_seed) {
      c.rng_seed = *rng_seed;
      c.watermark.rng_seed = *rng_seed;
    }
    if (sampler_seed) c.sampler.rng_seed = *sampler_seed;
    if (sample_budget) c.watermark.sample_budget = *sample_budget;
    if (sampling_threads) c.watermark.sampling_threads = *sampling_threads;
    if (backend) c.sampler.backend = parse_backend(*backend);
    if (url) c.sampler.url = *url;
    if (command) c.sampler.command = *command;
    if (method) c.method = parse_detect_method(*method);
    c.watermark.dist = c.dist.resolve();
    c.watermark.keys = load_keys(key_file);
    return c;
  }
};

std::vector<std::size_t> to_sizes(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (double x : v) out.push_back(static_cast<std::size_t>(x));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box sequence watermarking: embed, detect, benchmark, simulate."};
  app.require_subcommand(1);
  Streams io;

  auto* wm = app.add_subcommand("watermark", "Watermark generations for JSONL prompts");
  RunFlags wm_flags;
  wm_flags.add(wm, false);
  wm->add_option("--input", io.input, "JSONL input, - for stdin")->capture_default_str();
  wm->add_option("--output", io.output, "JSONL output, - for stdout")->capture_default_str();

  auto* det = app.add_subcommand("detect", "Score JSONL token records");
  RunFlags det_flags;
  det_flags.add(det, true);
  det->add_option("--input", io.input, "JSONL input, - for stdin")->capture_default_str();
  det->add_option("--output", io.output, "JSONL output, - for stdout")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "End-to-end ROC benchmark on a mock model");
  std::optional<std::string> bench_config;
  std::string bench_scenario = "dummy-lm";
  std::optional<std::size_t> bench_trials, bench_threads;
  std::optional<double> bench_attack;
  std::optional<std::uint64_t> bench_seed;
  std::string format = "table";
  bench->add_option("--config", bench_config, "JSON scenario file (fields of the bench section)");
  bench->add_option("--scenario", bench_scenario, "Base scenario: dummy-lm, dummy-lm-recursive")
      ->capture_default_str();
  bench->add_option("--trials", bench_trials, "Override trial count");
  bench->add_option("--attack-pct", bench_attack, "Random token replacement percentage");
  bench->add_option("--threads", bench_threads, "Worker threads");
  bench->add_option("--rng-seed", bench_seed, "Experiment seed");
  bench->add_option("--format", format, "jsonl, table or csv")->capture_default_str();
  bench->add_option("--output", io.output, "Output path, - for stdout")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Monte Carlo and closed-form experiments");
  sim->require_subcommand(1);
  sim->add_option("--output", io.output, "Output path, - for stdout")->capture_default_str();

  AlphaArgs alpha;
  std::vector<double> alpha_m;
  auto* s_alpha = sim->add_subcommand("alpha", "Expected entropy of m sampled tokens");
  s_alpha->add_option("--dist", alpha.dist, "uniform or zipf")->capture_default_str();
  s_alpha->add_option("--v", alpha.vocab_size, "Vocabulary size")->capture_default_str();
  s_alpha->add_option("--s", alpha.zipf_exponent, "Zipf exponent")->capture_default_str();
  s_alpha->add_option("--m", alpha_m, "Candidate counts");
  s_alpha->add_option("--trials", alpha.trials, "Trials per m")->capture_default_str();
  s_alpha->add_option("--rng-seed", alpha.rng_seed)->capture_default_str();

  GammaArgs gamma;
  auto* s_gamma = sim->add_subcommand("gamma", "Gamma LRT TPR at fixed FPR over T");
  s_gamma->add_option("--k", gamma.k)->capture_default_str();
  s_gamma->add_option("--m", gamma.m)->capture_default_str();
  s_gamma->add_option("--beta", gamma.beta)->capture_default_str();
  s_gamma->add_option("--T", gamma.T, "Test token counts");
  s_gamma->add_option("--fpr", gamma.fpr, "Target false positive rates");
  s_gamma->add_option("--mc-trials", gamma.mc_trials, "Idealized-model trials (0: none)")
      ->capture_default_str();
  s_gamma->add_option("--threads", gamma.threads)->capture_default_str();
  s_gamma->add_option("--rng-seed", gamma.rng_seed)->capture_default_str();

  DistortionArgs distortion;
  distortion.sampler.backend = Backend::MarkovMock;
  distortion.sampler.vocab_size = 5;
  std::string distortion_backend = "markov";
  auto* s_dist = sim->add_subcommand("distortion", "Watermarked vs exact chunk distribution");
  s_dist->add_option("--backend", distortion_backend, "Mock backend")->capture_default_str();
  s_dist->add_option("--v", distortion.sampler.vocab_size, "Vocabulary size")->capture_default_str();
  s_dist->add_option("--markov-seed", distortion.sampler.markov_seed)->capture_default_str();
  s_dist->add_option("--k", distortion.k)->capture_default_str();
  s_dist->add_option("--m", distortion.m)->capture_default_str();
  s_dist->add_option("--n", distortion.n)->capture_default_str();
  s_dist->add_option("--runs", distortion.runs)->capture_default_str();
  s_dist->add_flag("--fixed-key", distortion.fixed_key, "Reuse one key across runs");
  s_dist->add_option("--threads", distortion.threads)->capture_default_str();
  s_dist->add_option("--rng-seed", distortion.rng_seed)->capture_default_str();

  std::size_t dummy_trials = 200, dummy_threads = 1;
  std::uint64_t dummy_seed = 0;
  auto* s_dummy = sim->add_subcommand("dummy-lm", "Random-token LM, flat and recursive");
  s_dummy->add_option("--trials", dummy_trials)->capture_default_str();
  s_dummy->add_option("--threads", dummy_threads)->capture_default_str();
  s_dummy->add_option("--rng-seed", dummy_seed)->capture_default_str();
  s_dummy->add_option("--format", format, "jsonl, table or csv")->capture_default_str();

  BoundArgs bound;
  auto* bnd = app.add_subcommand("bound", "ROC-AUC lower bound for flat k = 1 watermarking");
  bnd->add_option("--m", bound.m)->capture_default_str();
  bnd->add_option("--T", bound.T)->capture_default_str();
  bnd->add_option("--alpha", bound.alpha, "Entropy term in nats [log m]");
  bnd->add_flag("--limit", bound.limit, "m -> infinity with alpha = log m");

  CLI11_PARSE(app, argc, argv);

  try {
    if (wm->parsed()) {
      const auto config = wm_flags.resolve();
      try {
        config.watermark.validate();
      } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kExitBadConfig;
      }
      return cmd_watermark(config, io.in(), io.out(), std::cerr);
    }
    if (det->parsed()) return cmd_detect(det_flags.resolve(), io.in(), io.out(), std::cerr);
    if (bench->parsed()) {
      BenchScenario scenario;
      if (bench_scenario == "dummy-lm") {
        scenario = dummy_lm_scenario(false);
      } else if (bench_scenario == "dummy-lm-recursive") {
        scenario = dummy_lm_scenario(true);
      } else {
        throw std::invalid_argument("unknown scenario " + bench_scenario);
      }
      if (bench_config) {
        DistSpec dist;
        apply_bench_json(scenario, dist, load_json_file(*bench_config));
      }
      if (bench_trials) scenario.trials = *bench_trials;
      if (bench_attack) scenario.attack_pct = *bench_attack;
      if (bench_threads) scenario.threads = *bench_threads;
      if (bench_seed) scenario.rng_seed = *bench_seed;
      return cmd_bench(scenario, parse_format(format), io.out());
    }
    if (s_alpha->parsed()) {
      if (!alpha_m.empty()) alpha.m = to_sizes(alpha_m);
      return cmd_simulate_alpha(alpha, io.out());
    }
    if (s_gamma->parsed()) return cmd_simulate_gamma(gamma, io.out());
    if (s_dist->parsed()) {
      distortion.sampler.backend = parse_backend(distortion_backend);
      return cmd_simulate_distortion(distortion, io.out());
    }
    if (s_dummy->parsed()) {
      return cmd_simulate_dummy_lm(dummy_trials, dummy_seed, dummy_threads, parse_format(format),
                                   io.out());
    }
    if (bnd->parsed()) return cmd_bound(bound, io.out());
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
