#include <sstream>
#include <stdexcept>

#include "bbwm/bench.hpp"
#include "support.hpp"

using namespace bbwm;

namespace {

BenchScenario small(Scheme scheme) {
  auto s = dummy_lm_scenario(false);
  s.scheme = scheme;
  s.trials = 30;
  s.watermark.m = 8;
  s.watermark.max_len = 40;
  s.lengths = {20, 40};
  s.rng_seed = 5;
  return s;
}

const BenchCell& full_cell(const BenchResult& r, DetectMethod m) {
  for (const auto& c : r.cells) {
    if (c.method == m && !c.length && !c.pooled) return c;
  }
  throw std::logic_error("missing cell");
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("dummy LM presets") {
  const auto flat = dummy_lm_scenario(false);
  CHECK(flat.sampler.vocab_size == 100);
  CHECK(flat.watermark.k == 20);
  CHECK(flat.watermark.max_len == 100);
  CHECK(flat.watermark.m == 64);
  CHECK(flat.watermark.keys.size() == 1);
  CHECK(flat.trials == 200);
  const auto rec = dummy_lm_scenario(true);
  CHECK(rec.watermark.keys.size() == 6);
  CHECK(rec.watermark.m == 2);
  CHECK(rec.resolved_methods() == std::vector<DetectMethod>{DetectMethod::Recursive});
  CHECK(flat.resolved_methods() == std::vector<DetectMethod>{DetectMethod::SumPValue});
}

TEST_CASE("bench is reproducible and independent of the thread count") {
  auto s = small(Scheme::Ours);
  s.methods = {DetectMethod::SumPValue, DetectMethod::FisherPValue};
  const auto a = end_to_end_bench(s);
  s.threads = 3;
  const auto b = end_to_end_bench(s);
  CHECK(a.neg_scores == b.neg_scores);
  CHECK(a.pos_scores == b.pos_scores);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) CHECK(a.cells[i].auc == b.cells[i].auc);
  // Two methods, each with two lengths, full text and the pool.
  CHECK(a.cells.size() == 2 * 4);
  const auto& sum = full_cell(a, DetectMethod::SumPValue);
  CHECK(sum.n_neg == 30);
  CHECK(sum.auc > 0.9);
  REQUIRE(sum.null_rate_p01);
  CHECK(*sum.null_rate_p01 <= 0.2);
}

TEST_CASE("baseline schemes run end to end") {
  for (auto scheme : {Scheme::Aaronson, Scheme::Kirchenbauer}) {
    const auto r = end_to_end_bench(small(scheme));
    CHECK(r.cells.front().auc > 0.8);
  }
}

TEST_CASE("attacks weaken detection") {
  auto s = small(Scheme::Ours);
  s.watermark.m = 4;
  const double clean = full_cell(end_to_end_bench(s), DetectMethod::SumPValue).auc;
  s.attack_pct = 60;
  const double attacked = full_cell(end_to_end_bench(s), DetectMethod::SumPValue).auc;
  CHECK(attacked < clean);
}

TEST_CASE("near-deterministic model leaves nothing to select") {
  auto s = small(Scheme::Ours);
  s.sampler.backend = Backend::MarkovMock;
  s.sampler.markov_temperature = 0.0;
  const auto r = end_to_end_bench(s);
  CHECK(full_cell(r, DetectMethod::SumPValue).auc < 0.7);
}

TEST_CASE("output formats") {
  auto s = small(Scheme::Ours);
  s.trials = 5;
  const auto r = end_to_end_bench(s);
  std::ostringstream table, csv;
  write_table(table, r);
  write_csv(csv, r);
  CHECK(table.str().find("sum") != std::string::npos);
  CHECK(csv.str().rfind("scenario,", 0) == 0);
}

TEST_CASE("scenario validation and parsing") {
  auto s = small(Scheme::Ours);
  s.trials = 1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = small(Scheme::Ours);
  s.sampler.backend = Backend::Http;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(parse_scheme("kirchenbauer") == Scheme::Kirchenbauer);
  CHECK(parse_detect_method("aaronson-fisher") == DetectMethod::AaronsonFisher);
  CHECK_THROWS_AS(parse_detect_method("nope"), std::invalid_argument);
}

}  // TEST_SUITE
