#include "bbwm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bbwm/remote_sampler.hpp"

namespace bbwm {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t draw_from_cumulative(std::span<const double> cumulative, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, cumulative.back());
  const double u = unit(rng);
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               cumulative.size() - 1);
}

double shannon_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::UniformMock: return "uniform";
    case Backend::ZipfMock: return "zipf";
    case Backend::MarkovMock: return "markov";
    case Backend::Subprocess: return "subprocess";
    case Backend::Http: return "http";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "uniform") return Backend::UniformMock;
  if (name == "zipf") return Backend::ZipfMock;
  if (name == "markov") return Backend::MarkovMock;
  if (name == "subprocess") return Backend::Subprocess;
  if (name == "http") return Backend::Http;
  throw std::invalid_argument("unknown sampler backend: " + std::string(name));
}

namespace {

std::vector<double> cumulative_of(std::span<const double> probs) {
  std::vector<double> c(probs.size());
  std::partial_sum(probs.begin(), probs.end(), c.begin());
  return c;
}

std::vector<double> normalized(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("mock sampler: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("mock sampler: probabilities must be finite and >= 0");
    }
    total += p;
  }
  if (!(total > 0.0)) throw std::invalid_argument("mock sampler: zero total probability");
  for (double& p : probs) p /= total;
  return probs;
}

}  // namespace

MockSampler::MockSampler(std::size_t vocab_size, std::uint64_t rng_seed, bool variable_length)
    : vocab_size_(vocab_size), rng_seed_(rng_seed), variable_length_(variable_length) {
  if (vocab_size < 2) throw std::invalid_argument("mock sampler: vocab size must be >= 2");
}

TokenSeq MockSampler::sample(std::span<const Token> prompt, std::size_t max_tokens) {
  if (max_tokens == 0) throw std::invalid_argument("sample: max_tokens must be >= 1");
  const std::uint64_t call = counter_.fetch_add(1);
  std::mt19937_64 rng(mix_seed(rng_seed_, call));
  std::size_t len = max_tokens;
  if (variable_length_) {
    len = std::uniform_int_distribution<std::size_t>(1, max_tokens)(rng);
  }
  TokenSeq context(prompt.begin(), prompt.end());
  context.reserve(prompt.size() + len);
  for (std::size_t i = 0; i < len; ++i) {
    context.push_back(draw_next(context, rng));
  }
  return TokenSeq(context.begin() + static_cast<std::ptrdiff_t>(prompt.size()), context.end());
}

UniformMock::UniformMock(std::size_t vocab_size, std::uint64_t rng_seed, bool variable_length)
    : MockSampler(vocab_size, rng_seed, variable_length) {}

std::vector<double> UniformMock::next_token_probs(std::span<const Token>) const {
  return std::vector<double>(vocab_size(), 1.0 / static_cast<double>(vocab_size()));
}

Token UniformMock::draw_next(std::span<const Token>, std::mt19937_64& rng) const {
  return static_cast<Token>(
      std::uniform_int_distribution<std::size_t>(0, vocab_size() - 1)(rng));
}

CategoricalMock::CategoricalMock(std::vector<double> probs, std::uint64_t rng_seed,
                                 bool variable_length)
    : MockSampler(probs.size(), rng_seed, variable_length),
      probs_(normalized(std::move(probs))),
      cumulative_(cumulative_of(probs_)) {}

std::vector<double> CategoricalMock::next_token_probs(std::span<const Token>) const {
  return probs_;
}

Token CategoricalMock::draw_next(std::span<const Token>, std::mt19937_64& rng) const {
  return static_cast<Token>(draw_from_cumulative(cumulative_, rng));
}

namespace {

std::vector<double> zipf_probs(std::size_t vocab_size, double exponent) {
  std::vector<double> p(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    p[i] = std::pow(static_cast<double>(i + 1), -exponent);
  }
  return p;
}

std::vector<std::vector<double>> random_rows(std::size_t vocab_size, double temperature,
                                             std::uint64_t seed) {
  if (temperature < 0.0) throw std::invalid_argument("markov mock: temperature must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> rows(vocab_size + 1, std::vector<double>(vocab_size));
  for (auto& row : rows) {
    std::vector<double> z(vocab_size);
    for (double& v : z) v = normal(rng);
    if (temperature == 0.0) {
      const auto best = std::max_element(z.begin(), z.end()) - z.begin();
      std::fill(row.begin(), row.end(), 0.0);
      row[static_cast<std::size_t>(best)] = 1.0;
      continue;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    for (std::size_t i = 0; i < vocab_size; ++i) row[i] = std::exp((z[i] - zmax) / temperature);
  }
  return rows;
}

}  // namespace

ZipfMock::ZipfMock(std::size_t vocab_size, double exponent, std::uint64_t rng_seed,
                   bool variable_length)
    : CategoricalMock(zipf_probs(vocab_size, exponent), rng_seed, variable_length) {}

MarkovMock::MarkovMock(std::size_t vocab_size, double temperature, std::uint64_t transition_seed,
                       std::uint64_t rng_seed, bool variable_length)
    : MarkovMock(random_rows(vocab_size, temperature, transition_seed), rng_seed,
                 variable_length) {}

MarkovMock::MarkovMock(std::vector<std::vector<double>> rows, std::uint64_t rng_seed,
                       bool variable_length)
    : MockSampler(rows.empty() ? 0 : rows.size() - 1, rng_seed, variable_length) {
  for (auto& row : rows) {
    if (row.size() != vocab_size()) {
      throw std::invalid_argument("markov mock: every row must have vocab_size entries");
    }
    row = normalized(std::move(row));
    cumulative_.push_back(cumulative_of(row));
  }
  rows_ = std::move(rows);
}

const std::vector<double>& MarkovMock::row_for(std::span<const Token> context) const {
  if (context.empty()) return rows_.back();
  const Token last = context.back();
  if (last >= vocab_size()) throw std::out_of_range("markov mock: token outside vocabulary");
  return rows_[last];
}

std::vector<double> MarkovMock::next_token_probs(std::span<const Token> context) const {
  return row_for(context);
}

Token MarkovMock::draw_next(std::span<const Token> context, std::mt19937_64& rng) const {
  const std::size_t row = context.empty() ? vocab_size() : context.back();
  if (row > vocab_size()) throw std::out_of_range("markov mock: token outside vocabulary");
  return static_cast<Token>(draw_from_cumulative(cumulative_[row], rng));
}

std::unique_ptr<MockSampler> make_mock_sampler(const SamplerSpec& spec) {
  switch (spec.backend) {
    case Backend::UniformMock:
      return std::make_unique<UniformMock>(spec.vocab_size, spec.rng_seed, spec.variable_length);
    case Backend::ZipfMock:
      return std::make_unique<ZipfMock>(spec.vocab_size, spec.zipf_exponent, spec.rng_seed,
                                        spec.variable_length);
    case Backend::MarkovMock:
      return std::make_unique<MarkovMock>(spec.vocab_size, spec.markov_temperature,
                                          spec.markov_seed, spec.rng_seed, spec.variable_length);
    case Backend::Subprocess:
    case Backend::Http:
      break;
  }
  throw std::invalid_argument("backend '" + std::string(to_string(spec.backend)) +
                              "' has no white-box next-token distribution");
}

std::unique_ptr<Sampler> make_sampler(const SamplerSpec& spec) {
  switch (spec.backend) {
    case Backend::Subprocess:
      return std::make_unique<SubprocessSampler>(spec.command, RetryPolicy::from(spec));
    case Backend::Http:
      return std::make_unique<HttpSampler>(spec.url, spec.max_in_flight, RetryPolicy::from(spec));
    default:
      return make_mock_sampler(spec);
  }
}

std::vector<double> entropy_profile(const NextTokenModel& model, std::span<const Token> prompt,
                                    std::size_t horizon) {
  TokenSeq context(prompt.begin(), prompt.end());
  std::vector<double> out;
  out.reserve(horizon);
  for (std::size_t step = 0; step < horizon; ++step) {
    const auto probs = model.next_token_probs(context);
    out.push_back(shannon_entropy(probs));
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    context.push_back(static_cast<Token>(best));
  }
  return out;
}

std::vector<double> entropy_profile(const SamplerSpec& spec, std::span<const Token> prompt,
                                    std::size_t horizon) {
  const auto model = make_mock_sampler(spec);
  return entropy_profile(*model, prompt, horizon);
}

}  // namespace bbwm
