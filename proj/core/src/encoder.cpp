#include "bbwm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "bbwm/prf.hpp"

namespace bbwm {

std::uint64_t WatermarkConfig::samples_per_chunk() const {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (m != 0 && total > std::numeric_limits<std::uint64_t>::max() / m) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= m;
  }
  return total;
}

void WatermarkConfig::validate() const {
  if (keys.empty()) throw std::invalid_argument("watermark config: at least one key is required");
  if (m < 1) throw std::invalid_argument("watermark config: m must be >= 1");
  if (n < 1) throw std::invalid_argument("watermark config: n must be >= 1");
  if (k < 1) throw std::invalid_argument("watermark config: k must be >= 1");
  if (max_len < 1) throw std::invalid_argument("watermark config: max_len must be >= 1");
  if (sampling_threads < 1) {
    throw std::invalid_argument("watermark config: sampling_threads must be >= 1");
  }
  std::vector<Key> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("watermark config: keys must be pairwise distinct");
  }
  if (samples_per_chunk() > sample_budget) {
    throw std::invalid_argument("watermark config: m^t = " + std::to_string(samples_per_chunk()) +
                                " raw samples per chunk exceeds the budget of " +
                                std::to_string(sample_budget));
  }
}

ScoredCandidates score_seqs(const ScoreDistribution& dist, std::span<const TokenSeq> candidates,
                            Key key, std::size_t n, std::span<const Token> prefix,
                            std::mt19937_64& aux_rng) {
  if (candidates.empty()) throw std::invalid_argument("score_seqs: no candidates");
  {
    std::vector<const TokenSeq*> order;
    for (const auto& c : candidates) order.push_back(&c);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return *a < *b; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (*order[i - 1] == *order[i]) {
        throw std::invalid_argument("score_seqs: candidates must be pairwise distinct");
      }
    }
  }
  // Only the last n-1 prefix tokens can appear in any window.
  const std::size_t ctx = std::min(prefix.size(), n - 1);
  const auto tail = prefix.subspan(prefix.size() - ctx);

  struct Entry {
    Seed seed;
    std::size_t candidate;
  };
  std::vector<Entry> entries;
  TokenSeq buffer;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    buffer.assign(tail.begin(), tail.end());
    buffer.insert(buffer.end(), candidates[i].begin(), candidates[i].end());
    for (const auto& w : ngram_windows(buffer, n, 0, ctx)) {
      entries.push_back({hash_ngram(key, w), i});
    }
  }

  std::shuffle(entries.begin(), entries.end(), aux_rng);
  ScoredCandidates out;
  out.seeds.resize(candidates.size());
  out.scores.resize(candidates.size());
  out.used_fallback.assign(candidates.size(), false);
  std::unordered_set<std::uint64_t> used;
  used.reserve(entries.size() * 2);
  for (const auto& e : entries) {
    if (used.insert(e.seed.value).second) out.seeds[e.candidate].push_back(e.seed);
  }

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double sum = 0.0;
    if (out.seeds[i].empty()) {
      Seed fresh{aux_rng()};
      while (!used.insert(fresh.value).second) fresh = Seed{aux_rng()};
      out.seeds[i].push_back(fresh);
      out.used_fallback[i] = true;
    }
    for (Seed s : out.seeds[i]) sum += prf_draw(dist, s);
    out.scores[i] = dist.sum_cdf(static_cast<unsigned>(out.seeds[i].size()), sum);
  }
  return out;
}

void group_candidates(std::span<const TokenSeq> samples, std::vector<TokenSeq>& uniques,
                      std::vector<std::size_t>& counts) {
  uniques.clear();
  counts.clear();
  std::map<TokenSeq, std::size_t> index;
  for (const auto& s : samples) {
    auto [it, inserted] = index.try_emplace(s, uniques.size());
    if (inserted) {
      uniques.push_back(s);
      counts.push_back(1);
    } else {
      ++counts[it->second];
    }
  }
}

std::size_t select_winner(std::span<const double> scores, std::span<const std::size_t> counts) {
  if (scores.empty() || scores.size() != counts.size()) {
    throw std::invalid_argument("select_winner: scores and counts must be nonempty and aligned");
  }
  std::size_t m = 0;
  for (auto c : counts) m += c;
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double exponent = static_cast<double>(m) / static_cast<double>(counts[i]);
    const double value = scores[i] > 0.0 ? exponent * std::log(scores[i])
                                         : -std::numeric_limits<double>::infinity();
    if (value > best_value) {
      best_value = value;
      best = i;
    }
  }
  return best;
}

CandidatePool build_pool(const ScoreDistribution& dist, std::span<const TokenSeq> samples, Key key,
                         std::size_t n, std::span<const Token> prefix, std::mt19937_64& aux_rng) {
  CandidatePool pool;
  group_candidates(samples, pool.uniques, pool.counts);
  auto scored = score_seqs(dist, pool.uniques, key, n, prefix, aux_rng);
  pool.seeds = std::move(scored.seeds);
  pool.scores = std::move(scored.scores);
  pool.winner = select_winner(pool.scores, pool.counts);
  return pool;
}

Watermarker::Watermarker(WatermarkConfig config)
    : config_(std::move(config)), aux_rng_(config_.rng_seed) {
  config_.validate();
}

std::vector<TokenSeq> Watermarker::draw_raw(std::span<const Token> full_prompt, Sampler& sampler,
                                            std::size_t max_tokens) {
  const std::size_t m = config_.m;
  std::vector<TokenSeq> samples(m);
  const std::size_t threads = std::min(config_.sampling_threads, m);
  if (threads <= 1) {
    for (auto& s : samples) s = sampler.sample(full_prompt, max_tokens);
    return samples;
  }
  // Results land at their sample index, so completion order is irrelevant.
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < m; i += threads) {
          samples[i] = sampler.sample(full_prompt, max_tokens);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return samples;
}

TokenSeq Watermarker::select_level(std::size_t level, std::span<const Token> full_prompt,
                                   std::span<const Token> generated, Sampler& sampler,
                                   std::size_t max_tokens) {
  std::vector<TokenSeq> samples;
  if (level + 1 == config_.keys.size()) {
    samples = draw_raw(full_prompt, sampler, max_tokens);
  } else {
    samples.reserve(config_.m);
    for (std::size_t i = 0; i < config_.m; ++i) {
      samples.push_back(select_level(level + 1, full_prompt, generated, sampler, max_tokens));
    }
  }
  auto pool = build_pool(config_.dist, samples, config_.keys[level], config_.n, generated,
                         aux_rng_);
  TokenSeq winner = pool.uniques[pool.winner];
  if (level == 0) last_pool_ = std::move(pool);
  return winner;
}

TokenSeq Watermarker::watermark_single(Key key, std::span<const Token> prompt,
                                       std::span<const Token> generated, Sampler& sampler,
                                       std::size_t max_tokens) {
  TokenSeq full(prompt.begin(), prompt.end());
  full.insert(full.end(), generated.begin(), generated.end());
  const auto samples = draw_raw(full, sampler, max_tokens);
  last_pool_ = build_pool(config_.dist, samples, key, config_.n, generated, aux_rng_);
  return last_pool_.uniques[last_pool_.winner];
}

TokenSeq Watermarker::watermark_recursive_single(std::span<const Token> prompt,
                                                 std::span<const Token> generated,
                                                 Sampler& sampler, std::size_t max_tokens) {
  TokenSeq full(prompt.begin(), prompt.end());
  full.insert(full.end(), generated.begin(), generated.end());
  return select_level(0, full, generated, sampler, max_tokens);
}

TokenSeq Watermarker::run_loop(std::span<const Token> prompt, Sampler& sampler,
                               const StopCondition& stop, bool recursive) {
  TokenSeq out;
  while (out.size() < config_.max_len && !(stop && stop(out))) {
    const std::size_t budget = std::min(config_.k, config_.max_len - out.size());
    const TokenSeq chunk = recursive
                               ? watermark_recursive_single(prompt, out, sampler, budget)
                               : watermark_single(config_.keys.front(), prompt, out, sampler,
                                                  budget);
    // An empty continuation is the sampler's end of sequence.
    if (chunk.empty()) break;
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  return out;
}

TokenSeq Watermarker::watermark(std::span<const Token> prompt, Sampler& sampler,
                                const StopCondition& stop) {
  return run_loop(prompt, sampler, stop, false);
}

TokenSeq Watermarker::watermark_recursive(std::span<const Token> prompt, Sampler& sampler,
                                          const StopCondition& stop) {
  return run_loop(prompt, sampler, stop, true);
}

TokenSeq Watermarker::generate(std::span<const Token> prompt, Sampler& sampler,
                               const StopCondition& stop) {
  return run_loop(prompt, sampler, stop, config_.recursive());
}

}  // namespace bbwm
