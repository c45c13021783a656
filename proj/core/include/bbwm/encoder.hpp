#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "bbwm/sampler.hpp"
#include "bbwm/score_dist.hpp"
#include "bbwm/types.hpp"

namespace bbwm {

struct WatermarkConfig {
  ScoreDistribution dist = ScoreDistribution::uniform();
  // One key selects the flat scheme. Several keys select the recursive
  // scheme, keys[0] being the outermost selection.
  std::vector<Key> keys{0};
  std::size_t m = 2;  // candidates per selection (per level when recursive)
  std::size_t n = 4;  // n-gram context length
  std::size_t k = 20;  // max tokens per chunk
  std::size_t max_len = 100;  // total token budget per generation
  std::uint64_t rng_seed = 0;  // auxiliary randomness (dedup shuffle, fallback seeds)
  std::uint64_t sample_budget = 1u << 16;  // cap on m^t raw calls per chunk
  std::size_t sampling_threads = 1;  // concurrent raw sampler calls per chunk

  bool recursive() const { return keys.size() > 1; }
  // Raw sampler calls per chunk, m^t; saturates at UINT64_MAX.
  std::uint64_t samples_per_chunk() const;
  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

// Stop predicate over the tokens generated so far; checked between chunks.
using StopCondition = std::function<bool(std::span<const Token>)>;

struct ScoredCandidates {
  std::vector<std::vector<Seed>> seeds;  // deduplicated, pairwise disjoint
  std::vector<double> scores;            // u_i in [0, 1]
  std::vector<bool> used_fallback;       // seed list was empty after dedup
};

// Scores pairwise-distinct candidates. `prefix` holds earlier generated
// tokens, usable as n-gram left context but never as positions. Seeds
// repeated anywhere in the collection are kept for one uniformly chosen
// instance; a candidate left with none gets one fresh unused seed whose
// draw comes from `aux_rng`.
ScoredCandidates score_seqs(const ScoreDistribution& dist, std::span<const TokenSeq> candidates,
                            Key key, std::size_t n, std::span<const Token> prefix,
                            std::mt19937_64& aux_rng);

struct CandidatePool {
  std::vector<TokenSeq> uniques;
  std::vector<std::size_t> counts;
  std::vector<std::vector<Seed>> seeds;
  std::vector<double> scores;
  std::size_t winner = 0;
};

// Unique sequences with multiplicities, in order of first appearance.
void group_candidates(std::span<const TokenSeq> samples, std::vector<TokenSeq>& uniques,
                      std::vector<std::size_t>& counts);

// argmax_i (m / c_i) log u_i; u_i = 0 maps to -inf, ties go to the lowest
// index.
std::size_t select_winner(std::span<const double> scores, std::span<const std::size_t> counts);

CandidatePool build_pool(const ScoreDistribution& dist, std::span<const TokenSeq> samples, Key key,
                         std::size_t n, std::span<const Token> prefix, std::mt19937_64& aux_rng);

// Owns the auxiliary generator for one generation stream. Not thread-safe;
// use one instance per concurrent generation.
class Watermarker {
 public:
  explicit Watermarker(WatermarkConfig config);

  const WatermarkConfig& config() const { return config_; }

  // One selection with `key` over m fresh samples of at most `max_tokens`
  // tokens continuing prompt + generated.
  TokenSeq watermark_single(Key key, std::span<const Token> prompt,
                            std::span<const Token> generated, Sampler& sampler,
                            std::size_t max_tokens);

  // Nested selection with all configured keys: m^t raw samples per call.
  TokenSeq watermark_recursive_single(std::span<const Token> prompt,
                                      std::span<const Token> generated, Sampler& sampler,
                                      std::size_t max_tokens);

  // Autoregressive loop with the first key only.
  TokenSeq watermark(std::span<const Token> prompt, Sampler& sampler,
                     const StopCondition& stop = {});
  // Autoregressive loop around watermark_recursive_single.
  TokenSeq watermark_recursive(std::span<const Token> prompt, Sampler& sampler,
                               const StopCondition& stop = {});
  // Dispatches on config().recursive().
  TokenSeq generate(std::span<const Token> prompt, Sampler& sampler,
                    const StopCondition& stop = {});

  // Pool of the most recent outermost selection (for inspection and tests).
  const CandidatePool& last_pool() const { return last_pool_; }

 private:
  std::vector<TokenSeq> draw_raw(std::span<const Token> full_prompt, Sampler& sampler,
                                 std::size_t max_tokens);
  TokenSeq select_level(std::size_t level, std::span<const Token> full_prompt,
                        std::span<const Token> generated, Sampler& sampler,
                        std::size_t max_tokens);
  TokenSeq run_loop(std::span<const Token> prompt, Sampler& sampler, const StopCondition& stop,
                    bool recursive);

  WatermarkConfig config_;
  std::mt19937_64 aux_rng_;
  CandidatePool last_pool_;
};

}  // namespace bbwm
