#include "bbwm/prf.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <stdexcept>

namespace bbwm {

std::vector<NGramView> ngram_windows(std::span<const Token> tokens, std::size_t n,
                                     std::size_t left_bound, std::size_t first) {
  if (n == 0) throw std::invalid_argument("ngram_windows: n must be >= 1");
  if (left_bound > tokens.size() || first < left_bound) {
    throw std::invalid_argument("ngram_windows: bounds outside the token sequence");
  }
  std::vector<NGramView> out;
  out.reserve(tokens.size() - std::min(first, tokens.size()));
  for (std::size_t i = first; i < tokens.size(); ++i) {
    const std::size_t start = (i + 1 >= n) ? std::max(left_bound, i + 1 - n) : left_bound;
    out.push_back(tokens.subspan(start, i + 1 - start));
  }
  return out;
}

std::vector<NGramView> extract_ngrams(std::span<const Token> tokens, std::size_t n,
                                      std::size_t prefix_len) {
  return ngram_windows(tokens, n, prefix_len, prefix_len);
}

std::vector<unsigned char> encode_ngram(Key key, NGramView ngram) {
  std::vector<unsigned char> buf;
  buf.reserve(12 + 4 * ngram.size());
  for (int shift = 56; shift >= 0; shift -= 8) {
    buf.push_back(static_cast<unsigned char>(key >> shift));
  }
  const auto count = static_cast<std::uint32_t>(ngram.size());
  for (int shift = 24; shift >= 0; shift -= 8) {
    buf.push_back(static_cast<unsigned char>(count >> shift));
  }
  for (Token t : ngram) {
    for (int shift = 24; shift >= 0; shift -= 8) {
      buf.push_back(static_cast<unsigned char>(t >> shift));
    }
  }
  return buf;
}

std::array<unsigned char, 32> sha256(std::span<const unsigned char> bytes) {
  std::array<unsigned char, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != digest.size()) {
    throw std::runtime_error("sha256: digest failed");
  }
  return digest;
}

Seed hash_ngram(Key key, NGramView ngram) {
  const auto digest = sha256(encode_ngram(key, ngram));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | digest[i];
  return Seed{v};
}

double seed_to_uniform(Seed seed) {
  return static_cast<double>(seed.value >> 11) * 0x1.0p-53;
}

double prf_draw(const ScoreDistribution& dist, Seed seed) {
  return dist.from_uniform(seed_to_uniform(seed));
}

}  // namespace bbwm
