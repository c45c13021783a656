#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "bbwm/score_dist.hpp"
#include "bbwm/types.hpp"

namespace bbwm {

// A view of one n-gram: 1..n consecutive tokens ending at some position.
using NGramView = std::span<const Token>;

// Windows ending at every position in [first, tokens.size()). Each window is
// at most n tokens long and never extends left of `left_bound`; windows that
// would reach past it are shortened (the l-gram rule at the boundary).
std::vector<NGramView> ngram_windows(std::span<const Token> tokens, std::size_t n,
                                     std::size_t left_bound, std::size_t first);

// One n-gram per token after the first `prefix_len` (prompt) tokens. Prompt
// tokens are neither positions nor left context.
std::vector<NGramView> extract_ngrams(std::span<const Token> tokens, std::size_t n,
                                      std::size_t prefix_len);

// Canonical byte encoding hashed by hash_ngram:
//   key       8 bytes, big-endian
//   count     4 bytes, big-endian (number of tokens in the n-gram)
//   token[i]  4 bytes each, big-endian
std::vector<unsigned char> encode_ngram(Key key, NGramView ngram);

std::array<unsigned char, 32> sha256(std::span<const unsigned char> bytes);

// First 8 bytes of SHA-256(encode_ngram(key, ngram)), read big-endian.
Seed hash_ngram(Key key, NGramView ngram);

// Top 53 bits of the seed scaled to [0, 1).
double seed_to_uniform(Seed seed);

// F[s]: the single pseudorandom draw from `dist` attached to `seed`.
double prf_draw(const ScoreDistribution& dist, Seed seed);

}  // namespace bbwm
