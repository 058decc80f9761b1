#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "xflex/errors.hpp"
#include "xflex/optim.hpp"
#include "xflex/quantile_model.hpp"

using namespace xflex;

namespace {

Frame linear_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::normal_distribution<double> e(0.0, 1.0);
  Frame f;
  auto& x = f.columns["x"];
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(u(rng));
    f.counts.push_back(static_cast<std::int64_t>(std::round(std::max(0.0, 2.0 + 3.0 * x.back() + e(rng)))));
  }
  return f;
}

Frame smooth_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f;
  auto& x = f.columns["x"];
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(u(rng));
    std::poisson_distribution<int> p(8.0 + 6.0 * std::sin(3.0 * x.back()));
    f.counts.push_back(p(rng));
  }
  return f;
}

}  // namespace

TEST_CASE("smoothed pinball") {
  for (double lambda : {0.01, 0.1, 1.0}) CHECK(smoothed_pinball(0.0, 0.3, lambda, 1.0) == doctest::Approx(lambda * std::log(2.0)));
  CHECK(smoothed_pinball(1.0, 0.9, 1e-8, 1.0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(smoothed_pinball(-1.0, 0.9, 1e-8, 1.0) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(std::isfinite(smoothed_pinball(1e6, 0.5, 0.01, 1.0)));
  for (double alpha : {0.05, 0.5, 0.95}) {
    for (double u = -20.0; u <= 20.0; u += 0.1) {
      const double lambda = 0.3, sigma = 1.7;
      const double rho = u >= 0 ? alpha * u / sigma : (alpha - 1.0) * u / sigma;
      const double gap = smoothed_pinball(u, alpha, lambda, sigma) - rho;
      CHECK(gap >= -1e-12);
      CHECK(gap <= lambda * std::log(2.0) + 1e-12);
    }
  }
}

TEST_CASE("rearrange floors and sorts") {
  CHECK(rearrange({5.2, 4.8}) == std::vector<double>{4.8, 5.2});
  CHECK(rearrange({-1.0, 3.0, 2.0}) == std::vector<double>{0.0, 2.0, 3.0});
}

TEST_CASE("pinball objective gradient matches finite differences") {
  const Frame f = smooth_data(400, 5);
  Formula formula;
  formula.smooths = {SplineSpec{"x", 8, 3, 2}};
  const Design d = Design::build(f, formula);
  const Eigen::MatrixXd x = d.matrix(f);
  Eigen::VectorXd y(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) y[static_cast<Eigen::Index>(i)] = static_cast<double>(f.counts[i]);
  const PinballObjective obj(x, y, d, {2.0}, 0.7, 0.1, 3.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd beta(x.cols());
    for (auto& b : beta) b = n(rng);
    beta[0] += 8.0;
    Eigen::VectorXd g;
    obj(beta, g);
    const Eigen::VectorXd fd = optim::numerical_gradient([&](const Eigen::VectorXd& b) { return obj.value(b); }, beta);
    CHECK((g - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("linear median recovery") {
  const Frame f = linear_data(5000, 1);
  Formula formula;
  formula.linear = {"x"};
  const auto m = fit_quantile_set(f, formula, QuantileGrid({0.25, 0.5, 0.75}));
  CHECK(std::abs(m.coefficients()[1][1] - 3.0) < 0.2);
  for (double g : m.gradient_norms()) CHECK(g <= 1e-6);
}

TEST_CASE("all-zero response") {
  Frame f;
  for (int i = 0; i < 200; ++i) {
    f.columns["x"].push_back(i * 0.01);
    f.counts.push_back(0);
  }
  Formula formula;
  formula.linear = {"x"};
  const auto m = fit_quantile_set(f, formula, QuantileGrid({0.1, 0.5, 0.9}));
  for (double x : {0.0, 1.0, 2.0}) {
    for (double v : predict_quantiles(m, {{"x", x}}).values) CHECK(std::abs(v) <= 0.51);
  }
}

TEST_CASE("fits are deterministic and row-order invariant") {
  const Frame f = smooth_data(1500, 8);
  Formula formula;
  formula.smooths = {SplineSpec{"x", 10, 3, 2}};
  const QuantileGrid grid({0.05, 0.25, 0.5, 0.9});
  const auto a = fit_quantile_set(f, formula, grid);
  const auto b = fit_quantile_set(f, formula, grid);
  for (std::size_t l = 0; l < grid.size(); ++l) CHECK(a.coefficients()[l] == b.coefficients()[l]);

  std::vector<std::size_t> perm(f.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  const auto c = fit_quantile_set(f.subset(perm), formula, grid);
  for (double x = 0.0; x <= 1.0; x += 0.05) {
    const auto qa = predict_quantiles(a, {{"x", x}});
    const auto qc = predict_quantiles(c, {{"x", x}});
    for (std::size_t l = 0; l < grid.size(); ++l) CHECK(qa.values[l] == doctest::Approx(qc.values[l]).epsilon(1e-6));
  }
}

TEST_CASE("in-sample coverage on homogeneous data") {
  std::mt19937_64 rng(12);
  std::negative_binomial_distribution<int> nb(10, 0.2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f;
  for (int i = 0; i < 5000; ++i) {
    f.columns["x"].push_back(u(rng));
    f.counts.push_back(nb(rng));
  }
  Formula formula;
  formula.smooths = {SplineSpec{"x", 10, 3, 2}};
  const std::vector<double> levels{0.25, 0.5, 0.75};
  const auto m = fit_quantile_set(f, formula, QuantileGrid(levels));
  const Eigen::MatrixXd q = m.predict(f);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    double below = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) below += static_cast<double>(f.counts[i]) < q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
    CHECK(std::abs(below / 5000.0 - levels[l]) < 0.03);
  }
}

TEST_CASE("intercept-only predictions") {
  Frame f;
  for (int i = 0; i < 400; ++i) f.counts.push_back(i % 10);
  const auto m = fit_quantile_set(f, Formula{}, QuantileGrid({0.05, 0.5, 0.95}));
  const auto q = predict_quantiles(m, {});
  const auto raw = m.linear_predictors({});
  for (std::size_t l = 0; l < 3; ++l) CHECK(q.values[l] == std::max(0.0, raw[static_cast<Eigen::Index>(l)]));
  CHECK(std::is_sorted(q.values.begin(), q.values.end()));
}

TEST_CASE("prediction needs every covariate") {
  const Frame f = linear_data(300, 2);
  Formula formula;
  formula.linear = {"x"};
  const auto m = fit_quantile_set(f, formula, QuantileGrid({0.5}));
  CHECK_THROWS_WITH_AS(predict_quantiles(m, {{"z", 1.0}}), doctest::Contains("x"), ValidationError);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(QuantileGrid({0.5, 0.25}), ValidationError);
  CHECK_THROWS_AS(QuantileGrid({0.0, 0.5}), ValidationError);
  CHECK_THROWS_AS(QuantileGrid({0.5, 1.0}), ValidationError);
}
