#include "bbwm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "bbwm/prf.hpp"
#include "bbwm/special.hpp"

namespace bbwm {

namespace {

// Window of the last n-1 context tokens followed by `token`.
TokenSeq window_with(std::span<const Token> context, std::size_t n, Token token) {
  const std::size_t ctx = std::min(context.size(), n - 1);
  TokenSeq w(context.end() - static_cast<std::ptrdiff_t>(ctx), context.end());
  w.push_back(token);
  return w;
}

__extension__ using u128 = unsigned __int128;

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  // Uniform on [0, range) by Lemire's method.
  std::uint64_t bounded(std::uint64_t range) {
    u128 product = static_cast<u128>(next()) * range;
    auto low = static_cast<std::uint64_t>(product);
    if (low < range) {
      const std::uint64_t threshold = (0 - range) % range;
      while (low < threshold) {
        product = static_cast<u128>(next()) * range;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

 private:
  std::uint64_t state_;
};

// First `count` entries of the forward Fisher-Yates permutation, tracking
// only displaced positions.
std::vector<Token> permutation_prefix(Seed seed, std::size_t vocab_size, std::size_t count) {
  SplitMix64 stream(seed.value);
  std::unordered_map<std::size_t, Token> moved;
  auto at = [&](std::size_t i) {
    const auto it = moved.find(i);
    return it == moved.end() ? static_cast<Token>(i) : it->second;
  };
  std::vector<Token> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count && i < vocab_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.bounded(vocab_size - i));
    const Token vi = at(i);
    const Token vj = at(j);
    moved[j] = vi;
    moved[i] = vj;
    out.push_back(vj);
  }
  return out;
}

void check_distribution(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("aaronson_select: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("aaronson_select: negative probability");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("aaronson_select: probabilities must sum to 1");
  }
}

}  // namespace

Token aaronson_select(std::span<const double> probs, std::span<const Token> context, Key key,
                      std::size_t n) {
  check_distribution(probs);
  if (n < 1) throw std::invalid_argument("aaronson_select: n must be >= 1");
  std::size_t best = probs.size();
  double best_value = -std::numeric_limits<double>::infinity();
  std::size_t nonzero = 0;
  Token only = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) {
      ++nonzero;
      only = static_cast<Token>(i);
    }
  }
  if (nonzero == 1) return only;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0)) continue;
    const auto w = window_with(context, n, static_cast<Token>(i));
    const double u = seed_to_uniform(hash_ngram(key, w));
    const double value = u > 0.0 ? std::log(u) / probs[i] : -std::numeric_limits<double>::infinity();
    if (best == probs.size() || value > best_value) {
      best = i;
      best_value = value;
    }
  }
  return static_cast<Token>(best);
}

TokenSeq aaronson_generate(const NextTokenModel& model, std::span<const Token> prompt, Key key,
                           std::size_t n, std::size_t length) {
  TokenSeq full(prompt.begin(), prompt.end());
  TokenSeq out;
  for (std::size_t i = 0; i < length; ++i) {
    const auto probs = model.next_token_probs(full);
    const Token t = aaronson_select(probs, out, key, n);
    out.push_back(t);
    full.push_back(t);
  }
  return out;
}

DetectionReport aaronson_score(std::span<const Token> tokens, Key key, std::size_t n,
                               AaronsonVariant variant) {
  const auto uniform = ScoreDistribution::uniform();
  const auto values = prf_values(uniform, tokens, key, n);
  switch (variant) {
    case AaronsonVariant::Raw: {
      DetectionReport report;
      report.method = DetectMethod::AaronsonRaw;
      report.t_unique = values.size();
      for (double r : values) report.score -= std::log(std::max(1.0 - r, 1e-300));
      return report;
    }
    case AaronsonVariant::FisherCorrected: {
      auto report = fisher_pvalue_from_values(uniform, values);
      report.method = DetectMethod::AaronsonFisher;
      return report;
    }
    case AaronsonVariant::SumCorrected: {
      auto report = sum_pvalue_from_values(uniform, values);
      report.method = DetectMethod::AaronsonSum;
      return report;
    }
  }
  throw std::invalid_argument("aaronson_score: unknown variant");
}

std::size_t KirchenbauerConfig::green_size(std::size_t vocab_size) const {
  return static_cast<std::size_t>(std::floor(gamma * static_cast<double>(vocab_size)));
}

void KirchenbauerConfig::validate(std::size_t vocab_size) const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("kirchenbauer: gamma in (0,1)");
  if (!(delta >= 0.0)) throw std::invalid_argument("kirchenbauer: delta must be >= 0");
  if (n < 1) throw std::invalid_argument("kirchenbauer: n must be >= 1");
  if (green_size(vocab_size) < 1) {
    throw std::invalid_argument("kirchenbauer: floor(gamma * V) must be >= 1");
  }
}

std::vector<Token> vocab_permutation(Seed seed, std::size_t vocab_size) {
  return permutation_prefix(seed, vocab_size, vocab_size);
}

std::vector<Token> green_list(Seed seed, std::size_t vocab_size, double gamma) {
  const auto g = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(vocab_size)));
  return permutation_prefix(seed, vocab_size, g);
}

bool is_green(Token token, Seed seed, std::size_t vocab_size, double gamma) {
  if (token >= vocab_size) return false;
  // Follow the token through the same shuffle: positions below i are final
  // after step i, so it is green iff some step i < g draws its position.
  const auto g = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(vocab_size)));
  SplitMix64 stream(seed.value);
  std::size_t pos = token;
  for (std::size_t i = 0; i < g; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.bounded(vocab_size - i));
    if (j == pos) return true;
    if (i == pos) pos = j;
  }
  return false;
}

Token kirchenbauer_select(std::span<const double> logits, const KirchenbauerConfig& config,
                          std::span<const Token> context, std::mt19937_64& rng) {
  const std::size_t vocab = logits.size();
  config.validate(vocab);
  std::vector<double> biased(logits.begin(), logits.end());
  for (double l : biased) {
    if (!std::isfinite(l)) throw std::invalid_argument("kirchenbauer_select: non-finite logit");
  }
  if (config.delta > 0.0) {
    for (std::size_t i = 0; i < vocab; ++i) {
      const auto token = static_cast<Token>(i);
      const Seed seed = hash_ngram(config.key, window_with(context, config.n, token));
      if (is_green(token, seed, vocab, config.gamma)) biased[i] += config.delta;
    }
  }
  const double top = *std::max_element(biased.begin(), biased.end());
  std::vector<double> cumulative(vocab);
  double total = 0.0;
  for (std::size_t i = 0; i < vocab; ++i) {
    total += std::exp(biased[i] - top);
    cumulative[i] = total;
  }
  return static_cast<Token>(draw_from_cumulative(cumulative, rng));
}

TokenSeq kirchenbauer_generate(const NextTokenModel& model, std::span<const Token> prompt,
                               const KirchenbauerConfig& config, std::size_t length,
                               std::mt19937_64& rng) {
  TokenSeq full(prompt.begin(), prompt.end());
  TokenSeq out;
  for (std::size_t i = 0; i < length; ++i) {
    const auto probs = model.next_token_probs(full);
    std::vector<double> logits(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) {
      // Zero-probability tokens get a large negative (finite) logit.
      logits[j] = probs[j] > 0.0 ? std::log(probs[j]) : -1e4;
    }
    const Token t = kirchenbauer_select(logits, config, out, rng);
    out.push_back(t);
    full.push_back(t);
  }
  return out;
}

DetectionReport kirchenbauer_score(std::span<const Token> tokens, const KirchenbauerConfig& config,
                                   std::size_t vocab_size) {
  config.validate(vocab_size);
  if (tokens.empty()) throw std::invalid_argument("kirchenbauer_score: empty token sequence");
  std::vector<std::pair<Seed, Token>> grams;
  for (const auto& w : extract_ngrams(tokens, config.n, 0)) {
    grams.emplace_back(hash_ngram(config.key, w), w.back());
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());

  std::size_t green = 0;
  for (const auto& [seed, token] : grams) {
    if (is_green(token, seed, vocab_size, config.gamma)) ++green;
  }
  const double T = static_cast<double>(grams.size());
  const double g = config.gamma;
  DetectionReport report;
  report.method = DetectMethod::Kirchenbauer;
  report.t_unique = grams.size();
  report.score = (static_cast<double>(green) - g * T) / std::sqrt(T * g * (1.0 - g));
  report.p_value = special::normal_sf(report.score);
  report.log_p_value = special::normal_log_sf(report.score);
  return report;
}

}  // namespace bbwm
