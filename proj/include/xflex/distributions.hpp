#pragma once

// Exact kernels for the generalized Pareto (GP), discrete generalized Pareto
// (DGP) and discrete gamma distributions.
//
// The DGP is the law of floor(X) for X ~ GP(sigma, xi):
//   pmf(k) = F_GP(k + 1) - F_GP(k),   cdf(k) = F_GP(k + 1).
// The discrete gamma is built the same way from the gamma CDF.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace xflex::dist {

/// Shape values with |xi| below this use the exponential limit.
inline constexpr double kXiZeroTolerance = 1e-10;

struct GpParams {
  double sigma = 1.0;  ///< scale, > 0
  double xi = 0.0;     ///< shape

  void validate() const;
};

struct DiscreteGammaParams {
  double kappa = 1.0;   ///< shape, > 0
  double lambda = 1.0;  ///< scale, > 0

  void validate() const;
};

// --- continuous GP ---------------------------------------------------------

/// log of the GP survival function log(1 - F_GP(y)); -inf beyond the upper
/// endpoint when xi < 0.
double gp_log_survival(double y, const GpParams& p);
double gp_cdf(double y, const GpParams& p);
/// Continuous GP quantile; +inf at level 1 when xi >= 0.
double gp_quantile(double level, const GpParams& p);

// --- discrete GP -----------------------------------------------------------

double dgp_pmf(std::int64_t k, const GpParams& p);
double dgp_cdf(std::int64_t k, const GpParams& p);
/// Largest support point, or nullopt for unbounded support (xi >= 0).
std::optional<std::int64_t> dgp_support_max(const GpParams& p);
/// Smallest k with dgp_cdf(k) >= level.
std::int64_t dgp_quantile(double level, const GpParams& p);

/// Sum of log pmf, observation i using sigmas[i]. nullopt when some
/// observation carries zero mass (outside the support under xi < 0).
std::optional<double> dgp_loglik(std::span<const std::int64_t> ks,
                                 std::span<const double> sigmas, double xi);

std::vector<std::int64_t> dgp_sample(std::size_t n, const GpParams& p,
                                     std::uint64_t seed);

// --- discrete gamma --------------------------------------------------------

double gamma_cdf(double x, const DiscreteGammaParams& p);
double dgamma_pmf(std::int64_t k, const DiscreteGammaParams& p);
double dgamma_cdf(std::int64_t k, const DiscreteGammaParams& p);
/// Smallest k with dgamma_cdf(k) >= level, level in [0, 1).
std::int64_t dgamma_quantile(double level, const DiscreteGammaParams& p);
std::vector<std::int64_t> dgamma_sample(std::size_t n,
                                        const DiscreteGammaParams& p,
                                        std::uint64_t seed);

}  // namespace xflex::dist
