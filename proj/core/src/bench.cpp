#include "bbwm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>


namespace bbwm {

namespace {

constexpr std::uint64_t kPromptStream = 0x70726F6D70740000ULL;
constexpr std::uint64_t kAttackStream = 0x61747461636B0000ULL;
constexpr std::uint64_t kEncoderStream = 0x656E636F64650000ULL;
constexpr std::uint64_t kKdeStream = 0x6B64650000000000ULL;

bool has_p_value(DetectMethod method) {
  return method != DetectMethod::KdeLRT && method != DetectMethod::AaronsonRaw;
}

bool method_fits(Scheme scheme, DetectMethod method) {
  switch (method) {
    case DetectMethod::SumPValue:
    case DetectMethod::FisherPValue:
    case DetectMethod::GammaLRT:
    case DetectMethod::KdeLRT:
    case DetectMethod::Recursive: return scheme == Scheme::Ours;
    case DetectMethod::AaronsonRaw:
    case DetectMethod::AaronsonFisher:
    case DetectMethod::AaronsonSum: return scheme == Scheme::Aaronson;
    case DetectMethod::Kirchenbauer: return scheme == Scheme::Kirchenbauer;
  }
  return false;
}

TokenSeq plain_generation(Sampler& sampler, std::span<const Token> prompt, std::size_t k,
                          std::size_t max_len) {
  TokenSeq full(prompt.begin(), prompt.end());
  TokenSeq out;
  while (out.size() < max_len) {
    const auto chunk = sampler.sample(full, std::min(k, max_len - out.size()));
    if (chunk.empty()) break;
    const std::size_t take = std::min(chunk.size(), max_len - out.size());
    out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(take));
    full.insert(full.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

struct Scorer {
  const BenchScenario& scenario;
  std::optional<DensityEstimate> f0;
  std::optional<DensityEstimate> f1;

  DetectionReport operator()(DetectMethod method, std::span<const Token> tokens) const {
    const auto& wm = scenario.watermark;
    const Key key = wm.keys.front();
    switch (method) {
      case DetectMethod::SumPValue: return detect(wm.dist, tokens, key, wm.n);
      case DetectMethod::FisherPValue: return detect_fisher(wm.dist, tokens, key, wm.n);
      case DetectMethod::Recursive: return detect_recursive(wm.dist, tokens, wm.keys, wm.n);
      case DetectMethod::GammaLRT: {
        const GammaLrtParams params{wm.dist.k_hint(), static_cast<double>(wm.m), wm.dist.beta(),
                                    0.0};
        return detect_lrt_gamma(params, wm.dist, tokens, key, wm.n);
      }
      case DetectMethod::KdeLRT: return detect_lrt_kde(wm.dist, *f0, *f1, tokens, key, wm.n);
      case DetectMethod::AaronsonRaw:
        return aaronson_score(tokens, key, wm.n, AaronsonVariant::Raw);
      case DetectMethod::AaronsonFisher:
        return aaronson_score(tokens, key, wm.n, AaronsonVariant::FisherCorrected);
      case DetectMethod::AaronsonSum:
        return aaronson_score(tokens, key, wm.n, AaronsonVariant::SumCorrected);
      case DetectMethod::Kirchenbauer:
        return kirchenbauer_score(tokens, scenario.kirchenbauer, scenario.sampler.vocab_size);
    }
    throw std::invalid_argument("bench: unknown method");
  }
};

// Ranking key for the mixed-length pool: -log p where a p-value exists, so
// texts of different lengths share one calibrated scale.
double pool_key(const DetectionReport& report) {
  if (report.log_p_value) return -*report.log_p_value;
  return report.score;
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Ours: return "ours";
    case Scheme::Aaronson: return "aaronson";
    case Scheme::Kirchenbauer: return "kirchenbauer";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::Ours, Scheme::Aaronson, Scheme::Kirchenbauer}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown scheme: " + std::string(name));
}

DetectMethod parse_detect_method(std::string_view name) {
  for (DetectMethod m :
       {DetectMethod::SumPValue, DetectMethod::FisherPValue, DetectMethod::GammaLRT,
        DetectMethod::KdeLRT, DetectMethod::Recursive, DetectMethod::AaronsonRaw,
        DetectMethod::AaronsonFisher, DetectMethod::AaronsonSum, DetectMethod::Kirchenbauer}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown detection method: " + std::string(name));
}

void BenchScenario::validate() const {
  if (trials < 2) throw std::invalid_argument("bench: need at least 2 trials");
  if (sampler.backend == Backend::Subprocess || sampler.backend == Backend::Http) {
    throw std::invalid_argument("bench: requires a mock sampler backend");
  }
  if (sampler.vocab_size < 1) throw std::invalid_argument("bench: vocab_size must be >= 1");
  watermark.validate();
  if (scheme == Scheme::Kirchenbauer) kirchenbauer.validate(sampler.vocab_size);
  if (!(attack_pct >= 0.0 && attack_pct <= 100.0)) {
    throw std::invalid_argument("bench: attack_pct must be in [0, 100]");
  }
  for (std::size_t len : lengths) {
    if (len == 0) throw std::invalid_argument("bench: truncation lengths must be positive");
  }
  for (double q : pauc_fprs) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("bench: pAUC FPR must be in (0, 1]");
  }
  for (DetectMethod method : resolved_methods()) {
    if (!method_fits(scheme, method)) {
      throw std::invalid_argument("bench: method " + std::string(to_string(method)) +
                                  " does not apply to scheme " + std::string(to_string(scheme)));
    }
    if (method == DetectMethod::GammaLRT && watermark.dist.family() != Family::NegGamma) {
      throw std::invalid_argument("bench: gamma-lrt requires the neg-gamma distribution");
    }
  }
  if (scheme == Scheme::Ours && watermark.recursive()) {
    for (DetectMethod method : resolved_methods()) {
      if (method == DetectMethod::GammaLRT || method == DetectMethod::KdeLRT) {
        throw std::invalid_argument("bench: LRT detectors apply to the flat scheme only");
      }
    }
  }
}

std::vector<DetectMethod> BenchScenario::resolved_methods() const {
  if (!methods.empty()) return methods;
  switch (scheme) {
    case Scheme::Ours:
      return {watermark.recursive() ? DetectMethod::Recursive : DetectMethod::SumPValue};
    case Scheme::Aaronson: return {DetectMethod::AaronsonSum};
    case Scheme::Kirchenbauer: return {DetectMethod::Kirchenbauer};
  }
  return {};
}

BenchScenario dummy_lm_scenario(bool recursive) {
  BenchScenario s;
  s.name = recursive ? "dummy-lm-recursive" : "dummy-lm-flat";
  s.sampler.backend = Backend::UniformMock;
  s.sampler.vocab_size = 100;
  s.watermark.n = 4;
  s.watermark.k = 20;
  s.watermark.max_len = 100;
  if (recursive) {
    s.watermark.keys = {1, 2, 3, 4, 5, 6};
    s.watermark.m = 2;
  } else {
    s.watermark.keys = {1};
    s.watermark.m = 64;
  }
  s.trials = 200;
  s.lengths = {25, 50, 75, 100};
  return s;
}

BenchResult end_to_end_bench(const BenchScenario& scenario) {
  scenario.validate();
  const auto methods = scenario.resolved_methods();
  const std::size_t slots = scenario.lengths.size() + 1;  // last slot: full text
  const std::size_t trials = scenario.trials;

  Scorer scorer{scenario, std::nullopt, std::nullopt};
  if (std::find(methods.begin(), methods.end(), DetectMethod::KdeLRT) != methods.end()) {
    std::mt19937_64 rng(mix_seed(scenario.rng_seed, kKdeStream));
    scorer.f0 = estimate_f0(scenario.watermark.dist, scenario.kde_samples, rng);
    scorer.f1 = estimate_f1(scenario.watermark.dist, scenario.watermark.k, scenario.watermark.m,
                            scenario.kde_samples, rng);
  }

  // [method][slot][trial]
  using Grid = std::vector<std::vector<std::vector<double>>>;
  auto grid = [&] {
    return Grid(methods.size(), std::vector<std::vector<double>>(slots, std::vector<double>(trials)));
  };
  Grid neg_score = grid(), pos_score = grid(), neg_pool = grid(), pos_pool = grid();
  Grid neg_p = grid(), pos_t = grid();

  parallel_trials(trials, scenario.threads, [&](std::size_t trial) {
    const std::size_t V = scenario.sampler.vocab_size;
    std::mt19937_64 prompt_rng(mix_seed(scenario.rng_seed ^ kPromptStream, trial));
    TokenSeq prompt(scenario.prompt_len);
    std::uniform_int_distribution<Token> any_token(0, static_cast<Token>(V - 1));
    for (auto& t : prompt) t = any_token(prompt_rng);

    SamplerSpec pos_spec = scenario.sampler;
    pos_spec.rng_seed = mix_seed(scenario.sampler.rng_seed ^ scenario.rng_seed, 2 * trial);
    SamplerSpec neg_spec = scenario.sampler;
    neg_spec.rng_seed = mix_seed(scenario.sampler.rng_seed ^ scenario.rng_seed, 2 * trial + 1);
    auto pos_model = make_mock_sampler(pos_spec);
    auto neg_model = make_mock_sampler(neg_spec);

    const auto& wm = scenario.watermark;
    TokenSeq pos;
    switch (scenario.scheme) {
      case Scheme::Ours: {
        WatermarkConfig config = wm;
        config.rng_seed = mix_seed(wm.rng_seed ^ scenario.rng_seed ^ kEncoderStream, trial);
        Watermarker marker(config);
        pos = marker.generate(prompt, *pos_model);
        break;
      }
      case Scheme::Aaronson:
        pos = aaronson_generate(*pos_model, prompt, wm.keys.front(), wm.n, wm.max_len);
        break;
      case Scheme::Kirchenbauer: {
        std::mt19937_64 rng(mix_seed(scenario.rng_seed ^ kEncoderStream, trial));
        pos = kirchenbauer_generate(*pos_model, prompt, scenario.kirchenbauer, wm.max_len, rng);
        break;
      }
    }
    const TokenSeq neg = plain_generation(*neg_model, prompt, wm.k, wm.max_len);
    if (scenario.attack_pct > 0.0) {
      std::mt19937_64 attack_rng(mix_seed(scenario.rng_seed ^ kAttackStream, trial));
      pos = attack_replace(pos, scenario.attack_pct, V, attack_rng);
    }

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      for (std::size_t slot = 0; slot < slots; ++slot) {
        const std::size_t len = slot < scenario.lengths.size() ? scenario.lengths[slot]
                                                               : std::max(pos.size(), neg.size());
        const std::span<const Token> pos_view(pos.data(), std::min(len, pos.size()));
        const std::span<const Token> neg_view(neg.data(), std::min(len, neg.size()));
        const auto rp = scorer(methods[mi], pos_view);
        const auto rn = scorer(methods[mi], neg_view);
        pos_score[mi][slot][trial] = rp.score;
        neg_score[mi][slot][trial] = rn.score;
        pos_pool[mi][slot][trial] = pool_key(rp);
        neg_pool[mi][slot][trial] = pool_key(rn);
        neg_p[mi][slot][trial] = rn.p_value.value_or(NAN);
        pos_t[mi][slot][trial] = static_cast<double>(rp.t_unique);
      }
    }
  });

  BenchResult result;
  result.scenario = scenario;
  auto make_cell = [&](DetectMethod method, std::span<const double> neg, std::span<const double> pos,
                       std::span<const double> null_p, std::span<const double> t_unique) {
    BenchCell cell;
    cell.method = method;
    cell.n_neg = neg.size();
    cell.n_pos = pos.size();
    const auto curve = roc(neg, pos);
    cell.auc = curve.auc();
    for (double q : scenario.pauc_fprs) cell.pauc.push_back(curve.pauc_at(q));
    double t_sum = 0.0;
    for (double t : t_unique) t_sum += t;
    cell.mean_t_unique = t_sum / static_cast<double>(t_unique.size());
    if (has_p_value(method)) {
      const auto hits = std::count_if(null_p.begin(), null_p.end(), [](double p) { return p <= 0.01; });
      cell.null_rate_p01 = static_cast<double>(hits) / static_cast<double>(null_p.size());
    }
    return cell;
  };

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::vector<double> pool_neg, pool_pos, pool_p, pool_t;
    for (std::size_t slot = 0; slot < slots; ++slot) {
      auto cell = make_cell(methods[mi], neg_score[mi][slot], pos_score[mi][slot], neg_p[mi][slot],
                            pos_t[mi][slot]);
      if (slot < scenario.lengths.size()) {
        cell.length = scenario.lengths[slot];
        pool_neg.insert(pool_neg.end(), neg_pool[mi][slot].begin(), neg_pool[mi][slot].end());
        pool_pos.insert(pool_pos.end(), pos_pool[mi][slot].begin(), pos_pool[mi][slot].end());
        pool_p.insert(pool_p.end(), neg_p[mi][slot].begin(), neg_p[mi][slot].end());
        pool_t.insert(pool_t.end(), pos_t[mi][slot].begin(), pos_t[mi][slot].end());
      }
      result.cells.push_back(std::move(cell));
    }
    if (!scenario.lengths.empty()) {
      auto cell = make_cell(methods[mi], pool_neg, pool_pos, pool_p, pool_t);
      cell.pooled = true;
      result.cells.push_back(std::move(cell));
    }
    result.neg_scores.push_back(neg_score[mi][slots - 1]);
    result.pos_scores.push_back(pos_score[mi][slots - 1]);
  }
  return result;
}

namespace {

std::string length_label(const BenchCell& cell) {
  if (cell.pooled) return "pooled";
  return cell.length ? std::to_string(*cell.length) : "full";
}

}  // namespace

void write_table(std::ostream& os, const BenchResult& result) {
  const auto& s = result.scenario;
  std::ostringstream header;
  header << std::left << std::setw(16) << "method" << std::setw(8) << "length" << std::right
         << std::setw(7) << "n" << std::setw(9) << "AUC";
  for (double q : s.pauc_fprs) {
    std::ostringstream label;
    label << "pAUC@" << q;
    header << std::setw(11) << label.str();
  }
  header << std::setw(10) << "T_unique" << std::setw(10) << "null@.01";
  os << "scenario " << s.name << " (scheme " << to_string(s.scheme) << ", trials " << s.trials
     << ", attack " << s.attack_pct << "%)\n";
  os << header.str() << '\n' << std::string(header.str().size(), '-') << '\n';
  os << std::fixed;
  for (const auto& cell : result.cells) {
    os << std::left << std::setw(16) << to_string(cell.method) << std::setw(8) << length_label(cell)
       << std::right << std::setw(7) << cell.n_pos << std::setw(9) << std::setprecision(4)
       << cell.auc;
    for (double p : cell.pauc) os << std::setw(11) << std::setprecision(4) << p;
    os << std::setw(10) << std::setprecision(1) << cell.mean_t_unique;
    if (cell.null_rate_p01) {
      os << std::setw(10) << std::setprecision(4) << *cell.null_rate_p01;
    } else {
      os << std::setw(10) << "-";
    }
    os << '\n';
  }
  os.unsetf(std::ios::fixed);
}

void write_csv(std::ostream& os, const BenchResult& result) {
  os << "scenario,method,length,n_neg,n_pos,auc";
  for (double q : result.scenario.pauc_fprs) os << ",pauc_" << q;
  os << ",mean_t_unique,null_rate_p01\n";
  os << std::setprecision(10);
  for (const auto& cell : result.cells) {
    os << result.scenario.name << ',' << to_string(cell.method) << ',' << length_label(cell) << ','
       << cell.n_neg << ',' << cell.n_pos << ',' << cell.auc;
    for (double p : cell.pauc) os << ',' << p;
    os << ',' << cell.mean_t_unique << ',';
    if (cell.null_rate_p01) os << *cell.null_rate_p01;
    os << '\n';
  }
}

}  // namespace bbwm
