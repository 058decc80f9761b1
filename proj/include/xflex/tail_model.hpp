#pragma once

// Discrete generalized Pareto tail for exceedances above the bulk transition
// quantile: constant shape xi, log-linked covariate-dependent scale.

#include <optional>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "xflex/data.hpp"
#include "xflex/design.hpp"
#include "xflex/quantile_model.hpp"

namespace xflex {

inline constexpr double kXiLower = -0.5;
inline constexpr double kXiUpper = 1.0;
inline constexpr double kSigmaFloor = 1e-4;
inline constexpr double kSigmaCeiling = 1e6;
inline constexpr std::size_t kMinExceedancesCovariate = 30;
inline constexpr std::size_t kMinExceedancesConstant = 10;

/// Maps an unconstrained value onto (kXiLower, kXiUpper).
double xi_from_raw(double raw);
double raw_from_xi(double xi);

class TailModel {
 public:
  TailModel(double xi, Design design, Eigen::VectorXd scale_coeffs, double alpha_T,
            std::size_t n_exceedances);

  double xi() const { return xi_; }
  const Design& design() const { return design_; }
  const Eigen::VectorXd& scale_coeffs() const { return scale_coeffs_; }
  double alpha_T() const { return alpha_T_; }
  std::size_t n_exceedances() const { return n_exceedances_; }
  std::vector<std::string> tail_covariates() const { return design_.formula().covariates(); }

  // Fit diagnostics.
  bool boundary = false;            ///< scale pinned at kSigmaFloor
  bool fell_back_to_constant = false;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;

  nlohmann::json to_json() const;
  static TailModel from_json(const nlohmann::json& j);

 private:
  double xi_;
  Design design_;
  Eigen::VectorXd scale_coeffs_;
  double alpha_T_;
  std::size_t n_exceedances_;
};

/// Rows with y >= ceil(q_alpha_T(x)); counts become y - ceil(q). The
/// covariate columns are carried over unchanged.
Frame extract_exceedances(const Frame& data, const QuantileModelSet& bulk, double alpha_T);
/// Same rule with precomputed per-row transition quantiles.
Frame extract_exceedances(const Frame& data, const std::vector<double>& transition_quantiles);

struct TailFitOptions {
  double smoothing_weight = 1.0;  ///< penalty weight for spline terms in the scale
  double gradient_tolerance = 1e-6;
  int max_iterations = 10000;
  /// Parameter vector (raw xi first, then scale coefficients) to start from.
  std::optional<Eigen::VectorXd> init;
};

/// Mean negative DGP log-likelihood plus smoothing penalties, over the
/// parameter vector (raw xi, scale coefficients). Exposed for gradient tests.
class DgpObjective {
 public:
  DgpObjective(const Eigen::MatrixXd& x, std::vector<std::int64_t> ks, const Design& design,
               double smoothing_weight);
  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
  double value(const Eigen::VectorXd& theta) const;

 private:
  const Eigen::MatrixXd& x_;
  std::vector<std::int64_t> ks_;
  const Design& design_;
  double weight_;
};

/// Throws ValidationError when fewer than kMinExceedancesConstant rows are
/// given. Covariate formulas with fewer than kMinExceedancesCovariate rows fall
/// back to a constant scale.
TailModel fit_tail(const Frame& exceedances, const Formula& tail_formula, double alpha_T,
                   const TailFitOptions& options = {});

/// exp(eta(x)) clamped to [kSigmaFloor, kSigmaCeiling].
double tail_scale(const TailModel& model, const CovariateMap& x);
Eigen::VectorXd tail_scales(const TailModel& model, const Frame& frame);

}  // namespace xflex
