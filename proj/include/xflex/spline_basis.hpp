#pragma once

// B-spline bases with difference penalties (P-splines) for the smooth terms
// of the additive quantile and tail regressions.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace xflex {

struct SplineSpec {
  std::string covariate_name;
  int basis_dim = 10;      ///< K, number of basis functions
  int degree = 3;
  int penalty_order = 2;   ///< difference order, 1 or 2

  void validate() const;
};

/// An evaluated basis. Immutable once built; evaluation clamps inputs to the
/// boundary knots.
class BasisExpansion {
 public:
  BasisExpansion(SplineSpec spec, std::vector<double> knots);

  const SplineSpec& spec() const { return spec_; }
  /// Distinct knots: lower boundary, interior knots, upper boundary.
  const std::vector<double>& knots() const { return knots_; }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::MatrixXd& penalty() const { return penalty_; }
  int dim() const { return spec_.basis_dim; }

  /// Basis row at x (clamped into [knots.front(), knots.back()]).
  Eigen::VectorXd evaluate(double x) const;
  /// Rows for many inputs.
  Eigen::MatrixXd evaluate(std::span<const double> xs) const;

 private:
  friend BasisExpansion build_basis(std::span<const double>, const SplineSpec&);

  SplineSpec spec_;
  std::vector<double> knots_;
  std::vector<double> augmented_;  // boundary knots repeated degree+1 times
  Eigen::MatrixXd design_;
  Eigen::MatrixXd penalty_;
};

/// Places interior knots at quantiles of `values` and evaluates the design.
/// Throws ValidationError when there are fewer than K distinct values.
BasisExpansion build_basis(std::span<const double> values, const SplineSpec& spec);

/// Row of basis values at x; same as expansion.evaluate(x).
Eigen::VectorXd evaluate_basis(const BasisExpansion& expansion, double x);

/// D^T D for the order-`order` difference matrix on `dim` coefficients.
Eigen::MatrixXd difference_penalty(int dim, int order);

}  // namespace xflex
