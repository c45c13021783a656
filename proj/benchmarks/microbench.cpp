#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "bbwm/detector.hpp"
#include "bbwm/encoder.hpp"
#include "bbwm/prf.hpp"
#include "bbwm/special.hpp"

namespace {

void BM_HashNgram(benchmark::State& state) {
  const std::vector<bbwm::Token> ngram{17, 4, 99, 12000};
  bbwm::Key key = 1;
  for (auto _ : state) benchmark::DoNotOptimize(bbwm::hash_ngram(key++, ngram));
}
BENCHMARK(BM_HashNgram);

void BM_ScoreSeqs(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<bbwm::Token> tok(0, 99);
  std::vector<bbwm::TokenSeq> candidates(m, bbwm::TokenSeq(20));
  for (std::size_t i = 0; i < m; ++i) {
    candidates[i][0] = static_cast<bbwm::Token>(i);
    for (std::size_t j = 1; j < 20; ++j) candidates[i][j] = tok(rng);
  }
  const auto dist = bbwm::ScoreDistribution::uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(bbwm::score_seqs(dist, candidates, 7, 4, {}, rng));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m));
}
BENCHMARK(BM_ScoreSeqs)->Arg(2)->Arg(16)->Arg(64);

void BM_IrwinHallCdf(benchmark::State& state) {
  const auto t = static_cast<unsigned>(state.range(0));
  double x = 0.3 * t;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bbwm::special::irwin_hall_sf(t, x));
    x = x > 0.7 * t ? 0.3 * t : x + 1e-3;
  }
}
BENCHMARK(BM_IrwinHallCdf)->Arg(5)->Arg(50)->Arg(500);

void BM_DetectSum(benchmark::State& state) {
  std::mt19937_64 rng(2);
  bbwm::TokenSeq text(static_cast<std::size_t>(state.range(0)));
  for (auto& t : text) t = static_cast<bbwm::Token>(rng() % 32000);
  const auto dist = bbwm::ScoreDistribution::uniform();
  for (auto _ : state) benchmark::DoNotOptimize(bbwm::detect(dist, text, 3, 4));
}
BENCHMARK(BM_DetectSum)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
