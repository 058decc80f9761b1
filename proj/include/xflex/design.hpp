#pragma once

// Additive design: intercept, linear terms and centred penalized smooths.
// Shared by the bulk quantile regression and the tail scale regression.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "xflex/data.hpp"
#include "xflex/spline_basis.hpp"

namespace xflex {

struct Formula {
  std::vector<std::string> linear;
  std::vector<SplineSpec> smooths;

  bool empty() const { return linear.empty() && smooths.empty(); }
  std::vector<std::string> covariates() const;
};

/// Column block of one smooth term after the sum-to-zero constraint.
struct PenaltyBlock {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  Eigen::MatrixXd matrix;  // Z^T S Z
};

class Design {
 public:
  /// Builds bases (knots from the training columns) and the centring
  /// constraints from `frame`.
  static Design build(const Frame& frame, const Formula& formula);

  const Formula& formula() const { return formula_; }
  Eigen::Index columns() const { return columns_; }
  const std::vector<PenaltyBlock>& penalties() const { return penalties_; }

  Eigen::MatrixXd matrix(const Frame& frame) const;
  Eigen::VectorXd row(const CovariateMap& x) const;

  nlohmann::json to_json() const;
  static Design from_json(const nlohmann::json& j);

 private:
  void finalize(std::vector<Eigen::VectorXd> column_means);

  Formula formula_;
  std::vector<BasisExpansion> bases_;
  std::vector<Eigen::VectorXd> constraint_;  // column means of each raw basis
  std::vector<Eigen::MatrixXd> null_space_;  // K x (K-1)
  std::vector<PenaltyBlock> penalties_;
  Eigen::Index columns_ = 1;
};

nlohmann::json formula_to_json(const Formula& f);
Formula formula_from_json(const nlohmann::json& j);

}  // namespace xflex
