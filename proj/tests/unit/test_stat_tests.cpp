#include <cmath>
#include <random>
#include <vector>

#include "bbwm/stat_tests.hpp"
#include "support.hpp"

using namespace bbwm::stats;

TEST_SUITE("stat_tests") {

TEST_CASE("Kolmogorov tail") {
  // Reference values of P(K > x).
  CHECK(kolmogorov_sf(0.0) == 1.0);
  CHECK(kolmogorov_sf(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-10));
  CHECK(kolmogorov_sf(1.36) == doctest::Approx(0.049485876755377876).epsilon(1e-10));
  CHECK(kolmogorov_sf(0.2) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(kolmogorov_sf(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-10));
  // Both series agree where they meet.
  CHECK(kolmogorov_sf(0.2999999) == doctest::Approx(kolmogorov_sf(0.3000001)).epsilon(1e-6));
}

TEST_CASE("KS accepts the true law and rejects a shifted one") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(20000), shifted(20000);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = u(rng);
    shifted[i] = std::min(1.0, xs[i] * 1.05);
  }
  CHECK(ks_uniform(xs).p_value > 0.001);
  CHECK(ks_uniform(shifted).p_value < 1e-6);
}

TEST_CASE("KS p-values are calibrated") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int rejections = 0;
  const int reps = 2000;
  std::vector<double> xs(50);
  for (int r = 0; r < reps; ++r) {
    for (auto& x : xs) x = u(rng);
    if (ks_uniform(xs).p_value < 0.05) ++rejections;
  }
  CHECK(std::fabs(rejections / double(reps) - 0.05) < 4 * test::binom_sigma(0.05, reps));
}

TEST_CASE("chi-square goodness of fit") {
  const std::vector<double> obs{25, 25, 25, 25};
  const std::vector<double> p{0.25, 0.25, 0.25, 0.25};
  const auto r = chi_square_gof(obs, p);
  CHECK(r.statistic == 0.0);
  CHECK(r.dof == 3.0);
  CHECK(r.p_value == doctest::Approx(1.0));
  const std::vector<double> skew{40, 20, 20, 20};
  const auto s = chi_square_gof(skew, p);
  CHECK(s.statistic == doctest::Approx(12.0));
  CHECK(s.p_value == doctest::Approx(0.007383160505359769).epsilon(1e-9));
  // Zero-expectation cells with zero counts are skipped.
  const auto z = chi_square_gof(std::vector<double>{50, 50, 0}, std::vector<double>{0.5, 0.5, 0.0});
  CHECK(z.dof == 1.0);
  CHECK(chi_square_gof(std::vector<double>{50, 49, 1}, std::vector<double>{0.5, 0.5, 0.0}).p_value == 0.0);
}

TEST_CASE("helpers") {
  CHECK(binomial_sigma(0.5, 100) == doctest::Approx(0.05));
  const std::vector<double> a{0.5, 0.5, 0.0}, b{0.25, 0.25, 0.5};
  CHECK(total_variation(a, b) == doctest::Approx(0.5));
}

}  // TEST_SUITE
