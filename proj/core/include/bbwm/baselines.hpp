#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "bbwm/detector.hpp"
#include "bbwm/sampler.hpp"
#include "bbwm/types.hpp"

namespace bbwm {

// White-box comparison schemes. They need the next-token distribution, so
// their generation loops take a NextTokenModel rather than a Sampler. As in
// the core scheme, prompt tokens are never part of an n-gram.

// ---------------------------------------------------------------------------
// Aaronson: u_i = U[h(K | w | i)] for every token i with p_i > 0, where w is
// the preceding (n-1)-gram, and the token maximizing u_i^(1/p_i) is emitted.
// (w | i) is exactly the n-gram window the core scheme hashes for a one-token
// chunk, so both schemes see the same PRF value for the same token.

// `context` holds earlier generated tokens (prompt excluded).
Token aaronson_select(std::span<const double> probs, std::span<const Token> context, Key key,
                      std::size_t n);

TokenSeq aaronson_generate(const NextTokenModel& model, std::span<const Token> prompt, Key key,
                           std::size_t n, std::size_t length);

enum class AaronsonVariant { Raw, FisherCorrected, SumCorrected };

// Raw: s_A = -sum log(1 - R_i) over unique n-grams (no p-value).
// FisherCorrected: score = chi^2_{2T} CDF(2 s_A).
// SumCorrected: score = IrwinHall(T) CDF(sum R_i).
DetectionReport aaronson_score(std::span<const Token> tokens, Key key, std::size_t n,
                               AaronsonVariant variant);

// ---------------------------------------------------------------------------
// Kirchenbauer: a green list of floor(gamma V) tokens, seeded from the n-gram
// that ends at (and includes) the token being scored, gets delta added to
// its logits.
//
// Green-list construction, pinned for cross-language reproducibility:
//   1. s = hash_ngram(key, window), the window ending at the scored token.
//   2. A SplitMix64 stream starts from state s.value: each output advances
//      the state by 0x9E3779B97F4A7C15 and applies the SplitMix64 finalizer.
//   3. Forward Fisher-Yates over perm = [0, 1, ..., V-1]: for i = 0, 1, ...
//      draw j = i + bounded(V - i) and swap perm[i], perm[j], where
//      bounded(r) is Lemire's multiply-shift with rejection (x * r, high
//      64 bits, rejecting while the low 64 bits are < (2^64 - r) mod r).
//   4. The green list is perm[0 .. floor(gamma V)).

struct KirchenbauerConfig {
  double gamma = 0.25;
  double delta = 2.0;
  std::size_t n = 4;
  Key key = 0;

  void validate(std::size_t vocab_size) const;
  std::size_t green_size(std::size_t vocab_size) const;
};

std::vector<Token> vocab_permutation(Seed seed, std::size_t vocab_size);
std::vector<Token> green_list(Seed seed, std::size_t vocab_size, double gamma);
bool is_green(Token token, Seed seed, std::size_t vocab_size, double gamma);

Token kirchenbauer_select(std::span<const double> logits, const KirchenbauerConfig& config,
                          std::span<const Token> context, std::mt19937_64& rng);

TokenSeq kirchenbauer_generate(const NextTokenModel& model, std::span<const Token> prompt,
                               const KirchenbauerConfig& config, std::size_t length,
                               std::mt19937_64& rng);

// z = (T_g - gamma T) / sqrt(T gamma (1 - gamma)) over unique n-grams;
// p_value is the one-sided normal tail of z.
DetectionReport kirchenbauer_score(std::span<const Token> tokens, const KirchenbauerConfig& config,
                                   std::size_t vocab_size);

}  // namespace bbwm
