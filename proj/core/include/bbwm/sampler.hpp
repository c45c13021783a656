#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbwm/types.hpp"

namespace bbwm {

// Transport or protocol failure of a sampler backend. `retryable` marks
// transient conditions (connection refused, child exited) that the remote
// adapters retry before giving up.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// The black box: maps (prompt, max tokens) to one sampled continuation.
// Successive calls with the same prompt must be i.i.d. draws.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual TokenSeq sample(std::span<const Token> prompt, std::size_t max_tokens) = 0;
};

// White-box capability: the exact next-token distribution. Only the mock
// backends implement it; the baselines require it, the core scheme does not.
class NextTokenModel {
 public:
  virtual ~NextTokenModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<double> next_token_probs(std::span<const Token> context) const = 0;
};

enum class Backend { UniformMock, ZipfMock, MarkovMock, Subprocess, Http };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view name);

struct SamplerSpec {
  Backend backend = Backend::UniformMock;
  std::size_t vocab_size = 100;
  std::uint64_t rng_seed = 0;
  // ZipfMock: p_i proportional to (i + 1)^-zipf_exponent.
  double zipf_exponent = 1.0;
  // MarkovMock: rows are softmax(z / temperature) with z ~ N(0, 1) drawn from
  // markov_seed; temperature 0 gives one-hot (deterministic) rows.
  double markov_temperature = 1.0;
  std::uint64_t markov_seed = 0;
  // Mocks return exactly max_tokens tokens unless this is set, in which case
  // the length is uniform on 1..max_tokens.
  bool variable_length = false;
  // Remote backends.
  std::string url;
  std::string command;
  std::size_t max_in_flight = 8;
  int retry_attempts = 3;
  int retry_backoff_ms = 50;
};

// Base for the mock language models. Each call to sample() takes the next
// value of an atomic call counter and seeds a private generator from
// (rng_seed, counter), so a stream of calls is reproducible while individual
// calls stay exchangeable.
class MockSampler : public Sampler, public NextTokenModel {
 public:
  MockSampler(std::size_t vocab_size, std::uint64_t rng_seed, bool variable_length);

  TokenSeq sample(std::span<const Token> prompt, std::size_t max_tokens) override;
  std::size_t vocab_size() const override { return vocab_size_; }
  std::uint64_t calls() const { return counter_.load(); }

 protected:
  virtual Token draw_next(std::span<const Token> context, std::mt19937_64& rng) const = 0;

 private:
  std::size_t vocab_size_;
  std::uint64_t rng_seed_;
  bool variable_length_;
  std::atomic<std::uint64_t> counter_{0};
};

class UniformMock final : public MockSampler {
 public:
  UniformMock(std::size_t vocab_size, std::uint64_t rng_seed, bool variable_length = false);
  std::vector<double> next_token_probs(std::span<const Token> context) const override;

 protected:
  Token draw_next(std::span<const Token> context, std::mt19937_64& rng) const override;
};

// Context-free categorical model with an arbitrary fixed distribution.
class CategoricalMock : public MockSampler {
 public:
  CategoricalMock(std::vector<double> probs, std::uint64_t rng_seed, bool variable_length = false);
  std::vector<double> next_token_probs(std::span<const Token> context) const override;

 protected:
  Token draw_next(std::span<const Token> context, std::mt19937_64& rng) const override;

 private:
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

class ZipfMock final : public CategoricalMock {
 public:
  ZipfMock(std::size_t vocab_size, double exponent, std::uint64_t rng_seed,
           bool variable_length = false);
};

// First-order Markov chain over the vocabulary; the empty context uses a
// separate initial-state row.
class MarkovMock final : public MockSampler {
 public:
  MarkovMock(std::size_t vocab_size, double temperature, std::uint64_t transition_seed,
             std::uint64_t rng_seed, bool variable_length = false);
  // Explicit transition rows: rows[0..V-1] are indexed by the previous
  // token, rows[V] is the initial distribution.
  MarkovMock(std::vector<std::vector<double>> rows, std::uint64_t rng_seed,
             bool variable_length = false);

  std::vector<double> next_token_probs(std::span<const Token> context) const override;

 protected:
  Token draw_next(std::span<const Token> context, std::mt19937_64& rng) const override;

 private:
  const std::vector<double>& row_for(std::span<const Token> context) const;

  std::vector<std::vector<double>> rows_;
  std::vector<std::vector<double>> cumulative_;
};

std::unique_ptr<Sampler> make_sampler(const SamplerSpec& spec);
// Mock backends only; throws std::invalid_argument for remote backends.
std::unique_ptr<MockSampler> make_mock_sampler(const SamplerSpec& spec);

// Shannon entropy (nats) of each next-token distribution along the greedy
// (argmax) continuation of `prompt`. Mock backends only.
std::vector<double> entropy_profile(const SamplerSpec& spec, std::span<const Token> prompt,
                                    std::size_t horizon);
std::vector<double> entropy_profile(const NextTokenModel& model, std::span<const Token> prompt,
                                    std::size_t horizon);

double shannon_entropy(std::span<const double> probs);

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Draws an index from a cumulative table (last entry ~1).
std::size_t draw_from_cumulative(std::span<const double> cumulative, std::mt19937_64& rng);

}  // namespace bbwm
