#include "commands.hpp"

#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "bbwm/harness.hpp"

namespace bbwm::cli {

namespace {

struct Record {
  std::size_t line;
  std::string text;
};

std::vector<Record> read_records(std::istream& in) {
  std::vector<Record> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back({number, line});
  }
  return records;
}

TokenSeq token_array(const json& j, const char* field) {
  if (!j.contains(field)) throw std::invalid_argument(std::string("missing field \"") + field + "\"");
  const auto& arr = j.at(field);
  if (!arr.is_array()) throw std::invalid_argument(std::string("\"") + field + "\" must be an array");
  TokenSeq out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() > 0xFFFFFFFFULL) {
      throw std::invalid_argument(std::string("\"") + field + "\" must hold token ids in [0, 2^32)");
    }
    out.push_back(v.get<Token>());
  }
  return out;
}

json record_id(const json& j) { return j.is_object() && j.contains("id") ? j.at("id") : json(); }

bool is_mock(Backend b) { return b != Backend::Subprocess && b != Backend::Http; }

// Runs `process` over every record with record-level parallelism and writes
// the results in input order.
template <class Process>
int run_records(const std::vector<Record>& records, std::size_t threads, std::ostream& out,
                std::ostream& log, Process&& process) {
  std::vector<json> results(records.size());
  std::vector<char> failed(records.size(), 0);
  parallel_trials(records.size(), threads, [&](std::size_t i) {
    json id;
    try {
      const json j = json::parse(records[i].text);
      id = record_id(j);
      if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
      results[i] = process(i, j);
      results[i]["id"] = id;
    } catch (const std::exception& e) {
      failed[i] = 1;
      results[i] = {{"id", id}, {"line", records[i].line}, {"error", e.what()}};
    }
  });
  int status = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (failed[i]) {
      log << "record at line " << records[i].line << ": " << results[i]["error"].get<std::string>()
          << '\n';
      status = kExitRecordFailure;
    }
    out << results[i].dump() << '\n';
  }
  out.flush();
  return status;
}

json report_json(const DetectionReport& r) {
  json j{{"method", std::string(to_string(r.method))},
         {"score", r.score},
         {"p_value", r.p_value ? json(*r.p_value) : json()},
         {"log_p_value", r.log_p_value ? json(*r.log_p_value) : json()},
         {"t_unique", r.t_unique}};
  if (!r.per_key.empty()) {
    json keys = json::array();
    for (const auto& kp : r.per_key) keys.push_back({{"key", kp.key}, {"p_value", kp.p_value}});
    j["per_key"] = keys;
  }
  return j;
}

json config_header(const json& config, std::uint64_t rng_seed) {
  return {{"type", "config"}, {"config", config}, {"rng_seed", rng_seed}};
}

void write_bench(const BenchResult& result, Format format, std::ostream& out) {
  const json config = to_json(result.scenario);
  switch (format) {
    case Format::Jsonl: {
      out << config_header(config, result.scenario.rng_seed).dump() << '\n';
      for (const auto& cell : result.cells) {
        json pauc = json::object();
        for (std::size_t i = 0; i < cell.pauc.size(); ++i) {
          std::ostringstream q;
          q << result.scenario.pauc_fprs[i];
          pauc[q.str()] = cell.pauc[i];
        }
        out << json{{"type", "cell"},
                    {"scenario", result.scenario.name},
                    {"method", std::string(to_string(cell.method))},
                    {"length", cell.pooled ? json("pooled") : cell.length ? json(*cell.length) : json("full")},
                    {"n_neg", cell.n_neg},
                    {"n_pos", cell.n_pos},
                    {"auc", cell.auc},
                    {"pauc", pauc},
                    {"mean_t_unique", cell.mean_t_unique},
                    {"null_rate_p01", cell.null_rate_p01 ? json(*cell.null_rate_p01) : json()}}
                   .dump()
            << '\n';
      }
      break;
    }
    case Format::Table:
      out << "# config " << config.dump() << '\n';
      write_table(out, result);
      break;
    case Format::Csv:
      out << "# config " << config.dump() << '\n';
      write_csv(out, result);
      break;
  }
}

}  // namespace

int cmd_watermark(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& log) {
  WatermarkConfig base = config.watermark;
  base.dist = config.dist.resolve();
  base.validate();
  if (config.threads < 1) throw std::invalid_argument("threads must be >= 1");

  std::unique_ptr<Sampler> shared;
  if (!is_mock(config.sampler.backend)) shared = make_sampler(config.sampler);

  const auto records = read_records(in);
  return run_records(records, config.threads, out, log, [&](std::size_t i, const json& j) {
    const TokenSeq prompt = token_array(j, "prompt");
    WatermarkConfig wc = base;
    wc.rng_seed = mix_seed(base.rng_seed, i);
    Watermarker marker(wc);
    TokenSeq tokens;
    if (shared) {
      tokens = marker.generate(prompt, *shared);
    } else {
      SamplerSpec spec = config.sampler;
      spec.rng_seed = mix_seed(config.sampler.rng_seed, i);
      auto sampler = make_mock_sampler(spec);
      tokens = marker.generate(prompt, *sampler);
    }
    return json{{"tokens", tokens}};
  });
}

int cmd_detect(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& log) {
  const auto dist = config.dist.resolve();
  const auto& keys = config.watermark.keys;
  const std::size_t n = config.watermark.n;
  if (keys.empty()) throw std::invalid_argument("no keys");
  if (n < 1) throw std::invalid_argument("watermark.n must be >= 1");

  std::optional<DensityEstimate> f0, f1;
  KirchenbauerConfig kb = config.kirchenbauer;
  kb.n = n;
  kb.key = keys.front();
  const GammaLrtParams gamma{dist.k_hint(), static_cast<double>(config.watermark.m), dist.beta(), 0.0};
  switch (config.method) {
    case DetectMethod::KdeLRT: {
      std::mt19937_64 rng(config.rng_seed);
      f0 = estimate_f0(dist, config.kde_samples, rng);
      f1 = estimate_f1(dist, config.watermark.k, config.watermark.m, config.kde_samples, rng);
      break;
    }
    case DetectMethod::GammaLRT:
      if (dist.family() != Family::NegGamma) {
        throw std::invalid_argument("gamma-lrt requires dist neg-gamma");
      }
      gamma.validate();
      break;
    case DetectMethod::Kirchenbauer: kb.validate(config.sampler.vocab_size); break;
    default: break;
  }

  const auto records = read_records(in);
  return run_records(records, config.threads, out, log, [&](std::size_t, const json& j) {
    const TokenSeq tokens = token_array(j, "tokens");
    const Key key = keys.front();
    switch (config.method) {
      case DetectMethod::SumPValue: return report_json(detect(dist, tokens, key, n));
      case DetectMethod::FisherPValue: return report_json(detect_fisher(dist, tokens, key, n));
      case DetectMethod::Recursive: return report_json(detect_recursive(dist, tokens, keys, n));
      case DetectMethod::GammaLRT: return report_json(detect_lrt_gamma(gamma, dist, tokens, key, n));
      case DetectMethod::KdeLRT: return report_json(detect_lrt_kde(dist, *f0, *f1, tokens, key, n));
      case DetectMethod::AaronsonRaw:
        return report_json(aaronson_score(tokens, key, n, AaronsonVariant::Raw));
      case DetectMethod::AaronsonFisher:
        return report_json(aaronson_score(tokens, key, n, AaronsonVariant::FisherCorrected));
      case DetectMethod::AaronsonSum:
        return report_json(aaronson_score(tokens, key, n, AaronsonVariant::SumCorrected));
      case DetectMethod::Kirchenbauer:
        return report_json(kirchenbauer_score(tokens, kb, config.sampler.vocab_size));
    }
    throw std::invalid_argument("unknown method");
  });
}

Format parse_format(const std::string& name) {
  if (name == "jsonl") return Format::Jsonl;
  if (name == "table") return Format::Table;
  if (name == "csv") return Format::Csv;
  throw std::invalid_argument("unknown output format: " + name);
}

int cmd_bench(const BenchScenario& scenario, Format format, std::ostream& out) {
  write_bench(end_to_end_bench(scenario), format, out);
  return 0;
}

int cmd_simulate_alpha(const AlphaArgs& args, std::ostream& out) {
  std::vector<double> probs;
  if (args.dist == "uniform") {
    probs = uniform_probs(args.vocab_size);
  } else if (args.dist == "zipf") {
    probs = zipf_probs(args.vocab_size, args.zipf_exponent);
  } else {
    throw std::invalid_argument("alpha: --dist must be uniform or zipf");
  }
  const json config{{"dist", args.dist},     {"vocab_size", args.vocab_size},
                    {"zipf_exponent", args.zipf_exponent}, {"m", args.m},
                    {"trials", args.trials}};
  out << config_header(config, args.rng_seed).dump() << '\n';
  for (std::size_t m : args.m) {
    const double alpha = simulate_alpha(probs, m, args.trials, mix_seed(args.rng_seed, m));
    out << json{{"type", "alpha"}, {"m", m}, {"alpha", alpha}, {"log_m", std::log(static_cast<double>(m))}}
               .dump()
        << '\n';
  }
  return 0;
}

int cmd_simulate_gamma(const GammaArgs& args, std::ostream& out) {
  const json config{{"k", args.k},   {"m", args.m},     {"beta", args.beta},
                    {"T", args.T},   {"fpr", args.fpr}, {"mc_trials", args.mc_trials}};
  out << config_header(config, args.rng_seed).dump() << '\n';
  const auto curves = gamma_rate_curves(args.k, args.m, args.beta, args.T, args.fpr);
  for (const auto& point : curves) {
    json rec{{"type", "gamma_rate"},
             {"T", point.T},
             {"fpr", point.fpr},
             {"threshold", point.threshold},
             {"tpr", point.tpr}};
    if (args.mc_trials > 0) {
      const auto m = static_cast<std::size_t>(args.m);
      if (static_cast<double>(m) != args.m) throw std::invalid_argument("gamma: Monte Carlo needs integer m");
      const auto sim = idealized_gamma_sim(args.k, m, args.beta, static_cast<unsigned>(point.T),
                                           args.mc_trials, point.threshold,
                                           mix_seed(args.rng_seed, static_cast<std::uint64_t>(point.T)),
                                           args.threads);
      std::vector<double> tpr_mc;
      for (double fnr : sim.fnr) tpr_mc.push_back(1.0 - fnr);
      rec["fpr_mc"] = sim.fpr;
      rec["tpr_mc"] = tpr_mc;
    }
    out << rec.dump() << '\n';
  }
  return 0;
}

int cmd_simulate_distortion(const DistortionArgs& args, std::ostream& out) {
  const auto result = distortion_check(args.sampler, args.dist.resolve(), args.k, args.m, args.n,
                                       args.runs, args.rng_seed, !args.fixed_key, args.threads);
  json config{{"sampler", {{"backend", std::string(to_string(args.sampler.backend))},
                           {"vocab_size", args.sampler.vocab_size},
                           {"markov_seed", args.sampler.markov_seed},
                           {"markov_temperature", args.sampler.markov_temperature},
                           {"zipf_exponent", args.sampler.zipf_exponent},
                           {"rng_seed", args.sampler.rng_seed}}},
              {"dist", {{"name", args.dist.name}, {"k", args.dist.k}, {"beta", args.dist.beta}}},
              {"k", args.k},
              {"m", args.m},
              {"n", args.n},
              {"runs", args.runs},
              {"fixed_key", args.fixed_key}};
  out << config_header(config, args.rng_seed).dump() << '\n';
  out << json{{"type", "distortion"},
              {"cells", result.support.size()},
              {"tv", result.tv},
              {"chi2_stat", result.chi2_stat},
              {"chi2_p", result.chi2_p}}
             .dump()
      << '\n';
  return 0;
}

int cmd_simulate_dummy_lm(std::size_t trials, std::uint64_t rng_seed, std::size_t threads,
                          Format format, std::ostream& out) {
  for (bool recursive : {false, true}) {
    auto scenario = dummy_lm_scenario(recursive);
    scenario.trials = trials;
    scenario.rng_seed = rng_seed;
    scenario.threads = threads;
    cmd_bench(scenario, format, out);
  }
  return 0;
}

int cmd_bound(const BoundArgs& args, std::ostream& out) {
  json rec{{"type", "bound"}, {"T", args.T}};
  if (args.limit) {
    rec["m"] = "inf";
    rec["bound"] = theorem2_limit(args.T);
  } else {
    BoundParams params{args.m, args.T, args.alpha.value_or(std::log(args.m))};
    rec["m"] = args.m;
    rec["alpha"] = params.alpha;
    rec["lambda"] = params.lambda();
    rec["bound"] = theorem2_bound(params);
  }
  out << rec.dump() << '\n';
  return 0;
}

}  // namespace bbwm::cli
