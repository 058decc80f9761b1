#include <doctest.h>

#include <cmath>
#include <random>

#include "xflex/errors.hpp"
#include "xflex/splice.hpp"

using namespace xflex;

namespace {

QuantileVector knots_example() { return {{0.05, 0.25, 0.5, 0.9}, {1.0, 3.0, 5.0, 10.0}}; }

}  // namespace

TEST_CASE("bulk cdf interpolation") {
  const BulkCdf f = build_bulk_cdf(knots_example());
  CHECK(f(5.0) == doctest::Approx(0.5));
  CHECK(f(4.0) == doctest::Approx(0.375));
  CHECK(f(-1.0) == 0.0);
  CHECK(f(0.0) == doctest::Approx(0.025));
  // Coincident values keep the higher level.
  const BulkCdf g = build_bulk_cdf({{0.25, 0.5, 0.75}, {2.0, 2.0, 6.0}});
  CHECK(g(2.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(build_bulk_cdf({{}, {}}), ValidationError);
  CHECK_THROWS_AS(build_bulk_cdf({{0.25, 0.5}, {3.0, 2.0}}), ValidationError);
}

TEST_CASE("splice with integer transition quantile") {
  const QuantileVector q{{0.05, 0.25, 0.5, 0.9}, {1.0, 3.0, 5.0, 7.0}};
  const auto d = splice_cdf(q, 0.9, dist::GpParams{1.0, 0.0});
  const BulkCdf bulk = build_bulk_cdf(q);
  CHECK(d.splice_floor() == 7);
  CHECK(d.splice_ceil() == 7);
  CHECK(d.alpha_tilde() == doctest::Approx(0.9));
  CHECK(d.cdf(7) == doctest::Approx(0.9 + 0.1 * (1.0 - std::exp(-1.0))));
  CHECK(d.cdf(7) >= bulk(7.0));
  for (int y = 0; y < 7; ++y) CHECK(d.cdf(y) == bulk(y));
}

TEST_CASE("splice with fractional transition quantile") {
  const QuantileVector q{{0.05, 0.25, 0.5, 0.9}, {1.0, 3.0, 5.0, 10.4}};
  const auto d = splice_cdf(q, 0.9, dist::GpParams{2.0, 0.2});
  const BulkCdf bulk = build_bulk_cdf(q);
  CHECK(d.splice_floor() == 10);
  CHECK(d.splice_ceil() == 11);
  for (int y = 0; y <= 10; ++y) CHECK(d.cdf(y) == bulk(y));
  CHECK(d.cdf(11) == doctest::Approx(d.alpha_tilde() + (1.0 - d.alpha_tilde()) * dist::dgp_cdf(0, {2.0, 0.2})));
  CHECK(std::abs(1.0 - d.cdf(std::int64_t{1} << 40)) < 1e-9);
}

TEST_CASE("quantile inverts cdf") {
  const QuantileVector q{{0.05, 0.25, 0.5, 0.9}, {0.0, 2.0, 6.0, 15.3}};
  const auto d = splice_cdf(q, 0.9, dist::GpParams{3.0, 0.25});
  CHECK(dist_quantile(d, 0.0) == 0);
  for (double p = 0.0005; p < 1.0; p += 0.001) {
    const auto k = dist_quantile(d, p);
    CHECK(dist_cdf(d, k) >= p);
    if (k > 0) CHECK(dist_cdf(d, k - 1) < p);
  }
  const double above = std::nextafter(d.alpha_tilde(), 1.0);
  CHECK(dist_quantile(d, above) >= d.splice_ceil());
  CHECK_THROWS_AS(dist_quantile(d, 1.0), ValidationError);
}

TEST_CASE("sampling matches the cdf") {
  const QuantileVector q{{0.05, 0.25, 0.5, 0.9}, {1.0, 4.0, 7.0, 12.0}};
  const auto d = splice_cdf(q, 0.9, dist::GpParams{2.5, 0.3});
  const auto s = dist_sample(d, 100000, 17);
  CHECK(s == dist_sample(d, 100000, 17));
  std::vector<double> hist(400, 0.0);
  for (auto k : s) {
    if (k < 400) hist[static_cast<std::size_t>(k)] += 1.0;
  }
  double emp = 0.0, sup = 0.0;
  for (int k = 0; k < 400; ++k) {
    emp += hist[static_cast<std::size_t>(k)] / 1e5;
    sup = std::max(sup, std::abs(emp - d.cdf(k)));
  }
  CHECK(sup < 0.01);
}

TEST_CASE("coincident bulk knots at the transition") {
  const QuantileVector q{{0.5, 0.9}, {0.0, 0.0}};
  const auto d = splice_cdf(q, 0.9, dist::GpParams{1.0, 0.0});
  CHECK_FALSE(d.saturated());
  CHECK(d.alpha_tilde() == doctest::Approx(0.9));
  CHECK(d.cdf(0) == doctest::Approx(0.9 + 0.1 * (1.0 - std::exp(-1.0))));
  const auto b = bulk_only_distribution(q);
  CHECK_FALSE(b.has_tail());
  CHECK(b.cdf(0) == doctest::Approx(0.9));
}

TEST_CASE("random spliced distributions stay coherent") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> inc(0.0, 6.0), sig(0.3, 6.0), xi(-0.4, 0.8);
  const std::vector<double> levels{0.05, 0.25, 0.5, 0.9};
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v;
    double c = 0.0;
    for (std::size_t l = 0; l < levels.size(); ++l) v.push_back(c += inc(rng));
    const auto d = splice_cdf({levels, v}, 0.9, dist::GpParams{sig(rng), xi(rng)});
    double prev = 0.0;
    for (std::int64_t y = 0; y <= 2000; ++y) {
      const double f = d.cdf(y);
      CHECK(f >= prev);
      prev = f;
    }
    // Interval probability two ways.
    const std::int64_t a = 3, b = 40;
    double pm = 0.0;
    for (std::int64_t k = a + 1; k <= b; ++k) pm += d.pmf(k);
    CHECK(std::abs(pm - (d.cdf(b) - d.cdf(a))) < 1e-10);
  }
}
