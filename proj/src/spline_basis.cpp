#include "xflex/spline_basis.hpp"

#include <algorithm>
#include <cmath>

#include "xflex/errors.hpp"

namespace xflex {

namespace {

// Type-7 sample quantile of sorted data.
double sorted_quantile(const std::vector<double>& sorted, double prob) {
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> interior_knots(const std::vector<double>& sorted, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 1; j <= count; ++j) {
    out.push_back(sorted_quantile(sorted, static_cast<double>(j) / (count + 1)));
  }
  return out;
}

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

}  // namespace

void SplineSpec::validate() const {
  if (basis_dim < 4) throw ValidationError("spline basis_dim must be >= 4");
  if (degree < 1) throw ValidationError("spline degree must be >= 1");
  if (basis_dim < degree + 1) {
    throw ValidationError("spline basis_dim must exceed the degree");
  }
  if (penalty_order != 1 && penalty_order != 2) {
    throw ValidationError("spline penalty_order must be 1 or 2");
  }
}

Eigen::MatrixXd difference_penalty(int dim, int order) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(dim, dim);
  for (int o = 0; o < order; ++o) {
    const Eigen::Index rows = d.rows() - 1;
    d = (d.bottomRows(rows) - d.topRows(rows)).eval();
  }
  return d.transpose() * d;
}

BasisExpansion::BasisExpansion(SplineSpec spec, std::vector<double> knots)
    : spec_(std::move(spec)), knots_(std::move(knots)) {
  spec_.validate();
  const auto expected = static_cast<std::size_t>(spec_.basis_dim - spec_.degree + 1);
  if (knots_.size() != expected || !strictly_increasing(knots_)) {
    throw ValidationError("spline knots for '" + spec_.covariate_name +
                          "' must be strictly increasing with K - degree + 1 entries");
  }
  augmented_.assign(static_cast<std::size_t>(spec_.degree), knots_.front());
  augmented_.insert(augmented_.end(), knots_.begin(), knots_.end());
  augmented_.insert(augmented_.end(), static_cast<std::size_t>(spec_.degree), knots_.back());
  penalty_ = difference_penalty(spec_.basis_dim, spec_.penalty_order);
}

Eigen::VectorXd BasisExpansion::evaluate(double x) const {
  const int p = spec_.degree;
  const int n = spec_.basis_dim;
  x = std::clamp(x, knots_.front(), knots_.back());

  // Knot span index s with augmented_[s] <= x < augmented_[s+1]; the last
  // non-degenerate span also owns the right boundary.
  int s = n - 1;
  if (x < knots_.back()) {
    const auto it = std::upper_bound(augmented_.begin() + p, augmented_.begin() + n + 1, x);
    s = static_cast<int>(it - augmented_.begin()) - 1;
  }

  std::vector<double> basis(static_cast<std::size_t>(p + 1), 0.0);
  std::vector<double> left(static_cast<std::size_t>(p + 1));
  std::vector<double> right(static_cast<std::size_t>(p + 1));
  basis[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - augmented_[s + 1 - j];
    right[j] = augmented_[s + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = basis[r] / (right[r + 1] + left[j - r]);
      basis[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    basis[j] = saved;
  }

  Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
  for (int r = 0; r <= p; ++r) row(s - p + r) = basis[r];
  return row;
}

Eigen::MatrixXd BasisExpansion::evaluate(std::span<const double> xs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), spec_.basis_dim);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = evaluate(xs[i]).transpose();
  }
  return out;
}

BasisExpansion build_basis(std::span<const double> values, const SplineSpec& spec) {
  spec.validate();
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) {
      throw ValidationError("non-finite value for smooth term '" + spec.covariate_name + "'");
    }
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < spec.basis_dim) {
    throw ValidationError("smooth term '" + spec.covariate_name + "' has " +
                          std::to_string(distinct.size()) +
                          " distinct values, fewer than basis_dim " +
                          std::to_string(spec.basis_dim) + " (rank deficient)");
  }

  const int n_interior = spec.basis_dim - spec.degree - 1;
  std::vector<double> knots{sorted.front()};
  auto inner = interior_knots(sorted, n_interior);
  std::vector<double> candidate = knots;
  candidate.insert(candidate.end(), inner.begin(), inner.end());
  candidate.push_back(sorted.back());
  if (!strictly_increasing(candidate)) {
    // Heavy ties: fall back to quantiles of the distinct values.
    inner = interior_knots(distinct, n_interior);
    candidate = knots;
    candidate.insert(candidate.end(), inner.begin(), inner.end());
    candidate.push_back(sorted.back());
  }

  BasisExpansion out(spec, std::move(candidate));
  out.design_ = out.evaluate(values);
  return out;
}

Eigen::VectorXd evaluate_basis(const BasisExpansion& expansion, double x) {
  return expansion.evaluate(x);
}

}  // namespace xflex
