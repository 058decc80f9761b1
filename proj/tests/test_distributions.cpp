#include <doctest.h>

#include <cmath>
#include <random>

#include "xflex/distributions.hpp"
#include "xflex/errors.hpp"

using namespace xflex::dist;

TEST_CASE("gp_cdf closed forms") {
  CHECK(gp_cdf(0.0, {2.0, 0.3}) == 0.0);
  CHECK(gp_cdf(1.0, {1.0, 0.0}) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(gp_cdf(2.5, {2.5, 0.3}) == doctest::Approx(1.0 - std::pow(1.3, -1.0 / 0.3)).epsilon(1e-14));
  // Bounded support for negative shape: endpoint at sigma / |xi| = 2.
  CHECK(gp_cdf(2.5, {1.0, -0.5}) == 1.0);
  CHECK_THROWS_AS(gp_cdf(std::nan(""), {1.0, 0.0}), xflex::ValidationError);
  CHECK_THROWS_AS(gp_cdf(1.0, {-1.0, 0.0}), xflex::ValidationError);
}

TEST_CASE("gp_cdf is continuous across the exponential branch") {
  for (double y : {0.1, 1.0, 3.7, 20.0}) {
    const double at0 = gp_cdf(y, {1.3, 0.0});
    CHECK(std::abs(gp_cdf(y, {1.3, 1e-12}) - at0) < 1e-8);
    CHECK(std::abs(gp_cdf(y, {1.3, -1e-12}) - at0) < 1e-8);
    CHECK(std::abs(gp_cdf(y, {1.3, 2e-10}) - at0) < 1e-8);
  }
}

TEST_CASE("dgp pmf and cdf") {
  const GpParams unit{1.0, 0.0};
  CHECK(dgp_pmf(0, unit) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(dgp_cdf(0, unit) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(dgp_pmf(3, {1.0, -0.5}) == 0.0);
  // Endpoint sigma / |xi| = 2: mass at 0 and 1 only.
  CHECK(dgp_support_max({1.0, -0.5}).value() == 1);
  CHECK(dgp_pmf(1, {1.0, -0.5}) > 0.0);
  CHECK(dgp_pmf(2, {1.0, -0.5}) == 0.0);
  CHECK_FALSE(dgp_support_max(unit).has_value());
  CHECK(std::abs(1.0 - dgp_cdf(10'000'000, unit)) < 1e-12);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> s(0.2, 5.0), x(-0.45, 0.9);
  for (int rep = 0; rep < 20; ++rep) {
    const GpParams p{s(rng), x(rng)};
    for (std::int64_t k = 1; k <= 50; ++k) {
      CHECK(dgp_cdf(k, p) - dgp_cdf(k - 1, p) == doctest::Approx(dgp_pmf(k, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("dgp normalization") {
  double total = 0.0;
  for (std::int64_t k = 0; k <= 1'000'000; ++k) total += dgp_pmf(k, {2.5, 0.0});
  CHECK(std::abs(total - 1.0) < 1e-9);

  for (double sigma : {0.5, 1.0, 2.5}) {
    for (double xi : {0.0, 0.3, -0.4}) {
      const GpParams p{sigma, xi};
      const std::int64_t K = 20000;
      double sum = 0.0;
      for (std::int64_t k = 0; k <= K; ++k) sum += dgp_pmf(k, p);
      const double tail = 1.0 - gp_cdf(static_cast<double>(K + 1), p);
      CHECK(std::abs(sum + tail - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("dgp quantile inverts the cdf") {
  for (const GpParams p : {GpParams{2.5, 0.3}, GpParams{1.0, -0.4}, GpParams{0.7, 0.0}}) {
    for (double level = 0.001; level < 1.0; level += 0.01) {
      const auto k = dgp_quantile(level, p);
      CHECK(dgp_cdf(k, p) >= level);
      if (k > 0) CHECK(dgp_cdf(k - 1, p) < level);
    }
  }
}

TEST_CASE("dgp loglik") {
  const std::vector<std::int64_t> one{0}, two{0, 0}, outside{5};
  const std::vector<double> s1{1.0}, s2{1.0, 1.0};
  CHECK(dgp_loglik(one, s1, 0.0).value() == doctest::Approx(std::log(1.0 - std::exp(-1.0))));
  CHECK(dgp_loglik(two, s2, 0.0).value() == doctest::Approx(2.0 * std::log(1.0 - std::exp(-1.0))));
  CHECK_FALSE(dgp_loglik(outside, s1, -0.5).has_value());
  CHECK_THROWS_AS(dgp_loglik(two, s1, 0.0), xflex::ValidationError);
}

TEST_CASE("dgp sampling") {
  const GpParams p{2.5, 0.3};
  const auto a = dgp_sample(100000, p, 11);
  CHECK(a == dgp_sample(100000, p, 11));
  std::vector<std::size_t> hist(200, 0);
  std::size_t above = 0;
  for (auto k : a) {
    CHECK(k >= 0);
    if (k < 200) ++hist[static_cast<std::size_t>(k)]; else ++above;
  }
  double emp = 0.0, sup = 0.0;
  for (std::int64_t k = 0; k < 200; ++k) {
    emp += static_cast<double>(hist[static_cast<std::size_t>(k)]) / 1e5;
    sup = std::max(sup, std::abs(emp - dgp_cdf(k, p)));
  }
  CHECK(sup < 0.01);
  for (auto k : dgp_sample(5000, {1.0, -0.5}, 3)) CHECK(k <= 2);
}

TEST_CASE("discrete gamma") {
  const DiscreteGammaParams expo{1.0, 1.0};
  CHECK(dgamma_pmf(0, expo) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-13));
  CHECK(dgamma_quantile(0.0, {1.5, 3.0}) == 0);
  const DiscreteGammaParams p{1.5, 4.0};
  double sum = 0.0;
  std::int64_t k = 0;
  for (; dgamma_cdf(k, p) <= 1.0 - 1e-10; ++k) sum += dgamma_pmf(k, p);
  sum += dgamma_pmf(k, p);
  CHECK(std::abs(sum - 1.0) < 1e-9);
  for (std::int64_t j = 0; j < 60; ++j) {
    if (dgamma_cdf(j, p) > dgamma_cdf(j - 1, p)) CHECK(dgamma_quantile(dgamma_cdf(j, p), p) == j);
  }
  CHECK(dgamma_sample(1000, p, 5) == dgamma_sample(1000, p, 5));
}
