#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "bbwm/encoder.hpp"
#include "bbwm/prf.hpp"
#include "support.hpp"

using namespace bbwm;

namespace {

// Records every request and forwards it.
class Recorder final : public Sampler {
 public:
  explicit Recorder(Sampler& inner) : inner_(inner) {}
  TokenSeq sample(std::span<const Token> prompt, std::size_t max_tokens) override {
    std::lock_guard lock(mutex_);
    requests.emplace_back(TokenSeq(prompt.begin(), prompt.end()), max_tokens);
    return inner_.sample(prompt, max_tokens);
  }
  std::vector<std::pair<TokenSeq, std::size_t>> requests;

 private:
  Sampler& inner_;
  std::mutex mutex_;
};

class Constant final : public Sampler {
 public:
  explicit Constant(TokenSeq seq) : seq_(std::move(seq)) {}
  TokenSeq sample(std::span<const Token>, std::size_t max_tokens) override {
    return TokenSeq(seq_.begin(), seq_.begin() + std::min(max_tokens, seq_.size()));
  }

 private:
  TokenSeq seq_;
};

WatermarkConfig flat(std::size_t m, std::size_t k, std::size_t max_len) {
  WatermarkConfig c;
  c.keys = {11};
  c.m = m;
  c.k = k;
  c.max_len = max_len;
  return c;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("chunking fills the budget and shortens the last chunk") {
  UniformMock mock(100, 3);
  Recorder rec(mock);
  Watermarker w(flat(4, 20, 90));
  const TokenSeq prompt{1, 2};
  const auto out = w.generate(prompt, rec);
  CHECK(out.size() == 90);
  REQUIRE(rec.requests.size() == 5 * 4);
  for (std::size_t i = 0; i < rec.requests.size(); ++i) {
    const auto& [p, budget] = rec.requests[i];
    const std::size_t chunk = i / 4;
    CHECK(budget == (chunk == 4 ? 10u : 20u));
    // The prompt sent to the black box is prompt + everything generated so far.
    CHECK(p.size() == 2 + 20 * chunk);
    CHECK(std::equal(prompt.begin(), prompt.end(), p.begin()));
    CHECK(std::equal(p.begin() + 2, p.end(), out.begin()));
  }
}

TEST_CASE("stop condition is checked between chunks") {
  UniformMock mock(100, 3);
  Watermarker w(flat(2, 10, 100));
  const auto out = w.generate({}, mock, [](std::span<const Token> g) { return g.size() >= 30; });
  CHECK(out.size() == 30);
}

TEST_CASE("m = 1 returns the sampler's own output") {
  UniformMock a(50, 9), b(50, 9);
  Watermarker w(flat(1, 10, 40));
  const auto out = w.generate({}, a);
  TokenSeq direct;
  while (direct.size() < 40) {
    const auto chunk = b.sample(direct, 10);
    direct.insert(direct.end(), chunk.begin(), chunk.end());
  }
  CHECK(out == direct);
}

TEST_CASE("identical samples return that sequence") {
  Constant c({5, 6, 7});
  Watermarker w(flat(8, 3, 3));
  CHECK(w.generate({}, c) == TokenSeq{5, 6, 7});
  CHECK(w.last_pool().uniques.size() == 1);
  CHECK(w.last_pool().counts == std::vector<std::size_t>{8});
}

TEST_CASE("empty continuation ends generation") {
  Constant c({});
  Watermarker w(flat(2, 3, 30));
  CHECK(w.generate({}, c).empty());
}

TEST_CASE("selection law follows multiplicities") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::size_t> counts{3, 1};
  const int trials = 200000;
  int first = 0;
  for (int i = 0; i < trials; ++i) {
    const std::vector<double> scores{u(rng), u(rng)};
    if (select_winner(scores, counts) == 0) ++first;
  }
  CHECK(std::fabs(first / double(trials) - 0.75) < 4 * test::binom_sigma(0.75, trials));
}

TEST_CASE("select_winner edge cases") {
  CHECK(select_winner(std::vector<double>{0.0, 0.0}, std::vector<std::size_t>{1, 1}) == 0);
  CHECK(select_winner(std::vector<double>{0.0, 0.1}, std::vector<std::size_t>{5, 1}) == 1);
  CHECK_THROWS_AS(select_winner(std::vector<double>{0.5}, std::vector<std::size_t>{1, 1}),
                  std::invalid_argument);
}

TEST_CASE("grouping keeps first appearance order") {
  const std::vector<TokenSeq> samples{{2}, {1}, {2}, {3}, {1}, {2}};
  std::vector<TokenSeq> uniques;
  std::vector<std::size_t> counts;
  group_candidates(samples, uniques, counts);
  CHECK(uniques == std::vector<TokenSeq>{{2}, {1}, {3}});
  CHECK(counts == std::vector<std::size_t>{3, 2, 1});
}

TEST_CASE("score_seqs rejects repeated candidates") {
  std::mt19937_64 rng(1);
  const std::vector<TokenSeq> c{{1, 2}, {3}, {1, 2}};
  CHECK_THROWS_AS(score_seqs(ScoreDistribution::uniform(), c, 1, 4, {}, rng),
                  std::invalid_argument);
}

TEST_CASE("shared seeds go to one uniformly chosen holder") {
  // With n = 1, {1} holds one copy of h(1) and {1, 1} holds two, so the
  // shuffle gives the seed to {1} a third of the time; the loser falls back.
  const std::vector<TokenSeq> c{{1}, {1, 1}};
  std::mt19937_64 rng(2);
  const int trials = 30000;
  int short_keeps = 0;
  for (int i = 0; i < trials; ++i) {
    const auto s = score_seqs(ScoreDistribution::uniform(), c, 7, 1, {}, rng);
    CHECK(s.used_fallback[0] != s.used_fallback[1]);
    CHECK(s.seeds[0].size() == 1);
    CHECK(s.seeds[1].size() == 1);
    if (!s.used_fallback[0]) {
      ++short_keeps;
      CHECK(s.seeds[0][0] == hash_ngram(7, std::vector<Token>{1}));
    }
  }
  CHECK(std::fabs(short_keeps / double(trials) - 1.0 / 3) <
        4 * test::binom_sigma(1.0 / 3, trials));
}

TEST_CASE("fallback scores are uniform") {
  std::mt19937_64 rng(3);
  const std::vector<TokenSeq> c{{4}, {4, 4, 4}};
  std::vector<double> fallback;
  for (int i = 0; i < 20000; ++i) {
    const auto s = score_seqs(ScoreDistribution::uniform(), c, 1, 1, {}, rng);
    for (int j = 0; j < 2; ++j) {
      if (s.used_fallback[j]) fallback.push_back(s.scores[j]);
    }
  }
  double mean = 0;
  for (double v : fallback) mean += v;
  mean /= fallback.size();
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("seeds are pairwise disjoint across candidates") {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<Token> tok(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<TokenSeq> distinct;
    while (distinct.size() < 6) {
      TokenSeq s(1 + gen() % 6);
      for (auto& t : s) t = tok(gen);
      distinct.insert(s);
    }
    const std::vector<TokenSeq> c(distinct.begin(), distinct.end());
    const TokenSeq prefix{2, 3, 1};
    const auto s = score_seqs(ScoreDistribution::normal(), c, 5, 2, prefix, gen);
    std::set<Seed> all;
    std::size_t total = 0;
    for (const auto& seeds : s.seeds) {
      CHECK_FALSE(seeds.empty());
      total += seeds.size();
      all.insert(seeds.begin(), seeds.end());
    }
    CHECK(all.size() == total);
    for (double u : s.scores) {
      CHECK(u >= 0.0);
      CHECK(u <= 1.0);
    }
  }
}

TEST_CASE("prefix supplies left context only") {
  std::mt19937_64 rng(0);
  const std::vector<TokenSeq> c{{9, 8}};
  const TokenSeq prefix{1, 2, 3, 4, 5};
  const auto s = score_seqs(ScoreDistribution::uniform(), c, 3, 3, prefix, rng);
  std::set<Seed> expected{hash_ngram(3, std::vector<Token>{4, 5, 9}),
                          hash_ngram(3, std::vector<Token>{5, 9, 8})};
  CHECK(std::set<Seed>(s.seeds[0].begin(), s.seeds[0].end()) == expected);
}

TEST_CASE("winner is the argmax of the raw sum when lengths agree") {
  // F_T is monotone, so comparing scores equals comparing sums.
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<Token> tok(0, 1u << 30);
  const auto dist = ScoreDistribution::neg_gamma(5, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TokenSeq> c(6, TokenSeq(5));
    for (auto& s : c) {
      for (auto& t : s) t = tok(gen);
    }
    auto pool = build_pool(dist, c, 99, 4, {}, gen);
    std::size_t best = 0;
    double best_sum = -1e300;
    for (std::size_t i = 0; i < c.size(); ++i) {
      double sum = 0;
      for (Seed s : pool.seeds[i]) sum += prf_draw(dist, s);
      if (sum > best_sum) {
        best_sum = sum;
        best = i;
      }
    }
    CHECK(pool.winner == best);
  }
}

TEST_CASE("recursive selection makes m^t raw calls per chunk") {
  UniformMock mock(100, 1);
  Recorder rec(mock);
  WatermarkConfig c = flat(2, 5, 5);
  c.keys = {1, 2};
  Watermarker w(c);
  CHECK(w.generate({}, rec).size() == 5);
  CHECK(rec.requests.size() == 4);

  UniformMock mock3(100, 1);
  Recorder rec3(mock3);
  c.keys = {1, 2, 3};
  c.m = 3;
  c.max_len = 10;
  Watermarker w3(c);
  w3.generate({}, rec3);
  CHECK(rec3.requests.size() == 2 * 27);
}

TEST_CASE("config validation") {
  WatermarkConfig c;
  CHECK_NOTHROW(c.validate());
  c.keys.clear();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.keys = {1, 1};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.keys.clear();
  for (Key k = 1; k <= 20; ++k) c.keys.push_back(k);
  CHECK(c.samples_per_chunk() == (1u << 20));
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("exceeds the budget"),
                       std::invalid_argument);
  c.keys = {1};
  c.m = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  WatermarkConfig huge;
  huge.m = 1000;
  huge.keys.assign(10, 0);
  for (std::size_t i = 0; i < 10; ++i) huge.keys[i] = i;
  CHECK(huge.samples_per_chunk() == UINT64_MAX);
}

TEST_CASE("generation is reproducible") {
  WatermarkConfig c = flat(16, 10, 50);
  c.rng_seed = 4;
  UniformMock a(30, 2), b(30, 2), other(30, 3);
  const auto x = Watermarker(c).generate({}, a);
  CHECK(x.size() == 50);
  CHECK(Watermarker(c).generate({}, b) == x);
  CHECK_FALSE(Watermarker(c).generate({}, other) == x);
}

TEST_CASE("concurrent sampling completes every chunk") {
  WatermarkConfig c = flat(16, 10, 50);
  c.sampling_threads = 4;
  UniformMock mock(30, 2);
  Recorder rec(mock);
  CHECK(Watermarker(c).generate({}, rec).size() == 50);
  CHECK(rec.requests.size() == 5 * 16);
}

}  // TEST_SUITE
