#include "xflex/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "xflex/errors.hpp"

namespace xflex::dist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Draws are capped here so flooring never overflows int64.
constexpr double kMaxDraw = 1e15;

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw ValidationError(std::string(name) + " must be finite");
  }
}

std::int64_t floor_to_count(double x) {
  if (!(x < kMaxDraw)) return static_cast<std::int64_t>(kMaxDraw);
  return static_cast<std::int64_t>(std::floor(x));
}

}  // namespace

void GpParams::validate() const {
  require_finite(sigma, "GP sigma");
  require_finite(xi, "GP xi");
  if (sigma <= 0.0) throw ValidationError("GP sigma must be positive");
}

void DiscreteGammaParams::validate() const {
  require_finite(kappa, "gamma kappa");
  require_finite(lambda, "gamma lambda");
  if (kappa <= 0.0 || lambda <= 0.0) {
    throw ValidationError("gamma kappa and lambda must be positive");
  }
}

double gp_log_survival(double y, const GpParams& p) {
  require_finite(y, "GP argument");
  if (y <= 0.0) return 0.0;
  if (std::abs(p.xi) < kXiZeroTolerance) return -y / p.sigma;
  const double t = p.xi * y / p.sigma;
  if (t <= -1.0) return -kInf;
  return -std::log1p(t) / p.xi;
}

double gp_cdf(double y, const GpParams& p) {
  p.validate();
  return -std::expm1(gp_log_survival(y, p));
}

double gp_quantile(double level, const GpParams& p) {
  p.validate();
  if (!(level >= 0.0 && level <= 1.0)) {
    throw ValidationError("GP quantile level must lie in [0, 1]");
  }
  if (level == 1.0) return p.xi < 0.0 ? -p.sigma / p.xi : kInf;
  const double l1p = std::log1p(-level);
  if (std::abs(p.xi) < kXiZeroTolerance) return -p.sigma * l1p;
  return p.sigma * std::expm1(-p.xi * l1p) / p.xi;
}

// Defined as the CDF difference so that the two telescope exactly. The
// likelihood works on the log scale and does not go through this.
double dgp_pmf(std::int64_t k, const GpParams& p) {
  p.validate();
  if (k < 0) return 0.0;
  return dgp_cdf(k, p) - dgp_cdf(k - 1, p);
}

double dgp_cdf(std::int64_t k, const GpParams& p) {
  if (k < 0) {
    p.validate();
    return 0.0;
  }
  return gp_cdf(static_cast<double>(k) + 1.0, p);
}

std::optional<std::int64_t> dgp_support_max(const GpParams& p) {
  p.validate();
  if (p.xi >= 0.0 || std::abs(p.xi) < kXiZeroTolerance) return std::nullopt;
  // pmf(k) > 0 exactly when k lies strictly below the GP endpoint.
  const double endpoint = -p.sigma / p.xi;
  return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(endpoint)) - 1);
}

std::int64_t dgp_quantile(double level, const GpParams& p) {
  p.validate();
  if (!(level >= 0.0 && level <= 1.0)) {
    throw ValidationError("DGP quantile level must lie in [0, 1]");
  }
  if (level <= 0.0) return 0;
  const auto top = dgp_support_max(p);
  if (level >= 1.0) {
    if (!top) throw ValidationError("DGP quantile at level 1 is unbounded");
    return *top;
  }
  std::int64_t k =
      std::max<std::int64_t>(0, floor_to_count(std::ceil(gp_quantile(level, p))) - 1);
  if (top) k = std::min(k, *top);
  while (k > 0 && dgp_cdf(k - 1, p) >= level) --k;
  while (dgp_cdf(k, p) < level) ++k;
  return k;
}

std::optional<double> dgp_loglik(std::span<const std::int64_t> ks,
                                 std::span<const double> sigmas, double xi) {
  if (ks.empty() || ks.size() != sigmas.size()) {
    throw ValidationError("dgp_loglik needs equal, non-empty ks and sigmas");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const GpParams p{sigmas[i], xi};
    p.validate();
    if (ks[i] < 0) throw ValidationError("DGP observations must be >= 0");
    const double lo = gp_log_survival(static_cast<double>(ks[i]), p);
    if (lo == -kInf) return std::nullopt;
    const double hi = gp_log_survival(static_cast<double>(ks[i]) + 1.0, p);
    const double mass = -std::expm1(hi - lo);
    if (!(mass > 0.0)) return std::nullopt;
    total += lo + std::log(mass);
  }
  return total;
}

std::vector<std::int64_t> dgp_sample(std::size_t n, const GpParams& p,
                                     std::uint64_t seed) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int64_t> out(n);
  for (auto& v : out) v = floor_to_count(gp_quantile(unif(rng), p));
  return out;
}

double gamma_cdf(double x, const DiscreteGammaParams& p) {
  p.validate();
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(p.kappa, x / p.lambda);
}

double dgamma_pmf(std::int64_t k, const DiscreteGammaParams& p) {
  p.validate();
  if (k < 0) return 0.0;
  const double a = static_cast<double>(k) / p.lambda;
  const double b = (static_cast<double>(k) + 1.0) / p.lambda;
  const double lower = a <= 0.0 ? 0.0 : boost::math::gamma_p(p.kappa, a);
  if (lower < 0.5) return boost::math::gamma_p(p.kappa, b) - lower;
  // Upper tail: difference of survival values avoids cancellation.
  return boost::math::gamma_q(p.kappa, a) - boost::math::gamma_q(p.kappa, b);
}

double dgamma_cdf(std::int64_t k, const DiscreteGammaParams& p) {
  p.validate();
  if (k < 0) return 0.0;
  return boost::math::gamma_p(p.kappa, (static_cast<double>(k) + 1.0) / p.lambda);
}

std::int64_t dgamma_quantile(double level, const DiscreteGammaParams& p) {
  p.validate();
  if (!(level >= 0.0 && level < 1.0)) {
    throw ValidationError("discrete gamma quantile level must lie in [0, 1)");
  }
  if (level <= 0.0) return 0;
  const double x = p.lambda * boost::math::gamma_p_inv(p.kappa, level);
  std::int64_t k = std::max<std::int64_t>(0, floor_to_count(std::ceil(x)) - 1);
  while (k > 0 && dgamma_cdf(k - 1, p) >= level) --k;
  while (dgamma_cdf(k, p) < level) ++k;
  return k;
}

std::vector<std::int64_t> dgamma_sample(std::size_t n,
                                        const DiscreteGammaParams& p,
                                        std::uint64_t seed) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int64_t> out(n);
  for (auto& v : out) v = dgamma_quantile(unif(rng), p);
  return out;
}

}  // namespace xflex::dist
