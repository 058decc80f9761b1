#pragma once

// Additive quantile regression on count data, one independent fit per
// probability level, minimizing the smoothed pinball loss
//
//   rho~(u) = (alpha - 1) u / sigma + lambda log(1 + exp(u / (lambda sigma)))
//
// plus difference penalties on the smooth terms.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "xflex/data.hpp"
#include "xflex/design.hpp"

namespace xflex {

/// Strictly increasing probability levels in (0, 1).
class QuantileGrid {
 public:
  QuantileGrid() = default;
  explicit QuantileGrid(std::vector<double> levels);

  const std::vector<double>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  /// Index of `level` (exact match within 1e-12), or nullopt.
  std::optional<std::size_t> index_of(double level) const;

 private:
  std::vector<double> levels_;
};

double smoothed_pinball(double u, double alpha, double lambda, double sigma);
/// d rho~ / d u.
double smoothed_pinball_derivative(double u, double alpha, double lambda, double sigma);

/// Smoothing weight choice: fixed per smooth term, or chosen by 5-fold CV.
struct SmoothingChoice {
  bool cross_validate = false;
  std::vector<double> weights;  ///< one per smooth term; empty means all 1.0
};

struct QuantileFitOptions {
  double lambda = 0.1;
  bool select_lambda = false;  ///< CV over {0.01, 0.05, 0.1, 0.3}
  SmoothingChoice smoothing;
  double gradient_tolerance = 1e-6;
  int max_iterations = 10000;
};

/// Levels and predicted values aligned by index; values are floored at zero
/// and nondecreasing.
struct QuantileVector {
  std::vector<double> levels;
  std::vector<double> values;

  double at(double level) const;
};

class QuantileModelSet {
 public:
  QuantileModelSet(QuantileGrid grid, Design design, std::vector<Eigen::VectorXd> coefficients,
                   std::vector<double> smoothing_weights, double lambda, double sigma_hat);

  const QuantileGrid& grid() const { return grid_; }
  const Design& design() const { return design_; }
  const std::vector<Eigen::VectorXd>& coefficients() const { return coefficients_; }
  const std::vector<double>& smoothing_weights() const { return smoothing_weights_; }
  double lambda() const { return lambda_; }
  double sigma_hat() const { return sigma_hat_; }
  /// Final gradient norms of the per-level fits (empty after loading).
  const std::vector<double>& gradient_norms() const { return gradient_norms_; }

  /// Raw linear predictors, one per level, before flooring and sorting.
  Eigen::VectorXd linear_predictors(const CovariateMap& x) const;
  /// Batch version: rows x levels, floored and rearranged per row.
  Eigen::MatrixXd predict(const Frame& frame) const;

  nlohmann::json to_json() const;
  static QuantileModelSet from_json(const nlohmann::json& j);

 private:
  friend QuantileModelSet fit_quantile_set(const Frame&, const Formula&, const QuantileGrid&,
                                           const QuantileFitOptions&);
  QuantileGrid grid_;
  Design design_;
  std::vector<Eigen::VectorXd> coefficients_;
  std::vector<double> smoothing_weights_;
  double lambda_;
  double sigma_hat_;
  std::vector<double> gradient_norms_;
};

/// Penalized smoothed-pinball objective for one level, exposed for gradient
/// checks. Value is the mean loss plus sum_t w_t b_t' S_t b_t.
class PinballObjective {
 public:
  PinballObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Design& design,
                   std::vector<double> weights, double alpha, double lambda, double sigma);
  double operator()(const Eigen::VectorXd& beta, Eigen::VectorXd& grad) const;
  double value(const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

 private:
  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const Design& design_;
  std::vector<double> weights_;
  double alpha_, lambda_, sigma_;
};

/// Robust scale of residuals from a penalized least-squares mean fit:
/// 1.4826 * median |r|, falling back to sd(y) and then 1 when zero.
double preliminary_scale(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Design& design,
                         const std::vector<double>& weights);

QuantileModelSet fit_quantile_set(const Frame& data, const Formula& formula,
                                  const QuantileGrid& grid, const QuantileFitOptions& options = {});

/// Floors at zero and sorts ascending across levels.
QuantileVector predict_quantiles(const QuantileModelSet& model, const CovariateMap& x);

/// Sorted, zero-floored copy of raw per-level values.
std::vector<double> rearrange(std::vector<double> values);

}  // namespace xflex
