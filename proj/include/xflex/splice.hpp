#pragma once

// Spliced predictive distribution on the nonnegative integers: linearly
// interpolated bulk quantiles up to floor(q_T), a rescaled DGP tail from
// ceil(q_T) on.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "xflex/data.hpp"
#include "xflex/distributions.hpp"
#include "xflex/quantile_model.hpp"
#include "xflex/tail_model.hpp"

namespace xflex {

/// Integer-support distribution queried through its CDF.
class CountDistribution {
 public:
  virtual ~CountDistribution() = default;

  virtual double cdf(std::int64_t y) const = 0;
  /// min{k >= 0 : cdf(k) >= p}. The default searches the CDF.
  virtual std::int64_t quantile(double p) const;
  /// cdf(0), ..., cdf(top).
  virtual std::vector<double> cdf_table(std::int64_t top) const;

  double pmf(std::int64_t y) const { return cdf(y) - cdf(y - 1); }
  /// Inversion of uniform draws; a pure function of (distribution, n, seed).
  std::vector<std::int64_t> sample(std::size_t n, std::uint64_t seed) const;
};

/// Piecewise-linear CDF through (quantile value, level) knots with the left
/// anchor (-1, 0). Coincident values keep the highest level. Past the last
/// knot the last segment's slope is continued up to 1.
class BulkCdf {
 public:
  BulkCdf() = default;
  explicit BulkCdf(std::vector<std::pair<double, double>> knots);

  /// Knots including the left anchor, values strictly increasing.
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }
  double operator()(double y) const;

 private:
  std::vector<std::pair<double, double>> knots_;
};

/// Throws ValidationError for an empty grid or decreasing values.
BulkCdf build_bulk_cdf(const QuantileVector& quantiles);

class PredictiveDistribution : public CountDistribution {
 public:
  /// Bulk-only distribution (no tail).
  explicit PredictiveDistribution(BulkCdf bulk);
  PredictiveDistribution(BulkCdf bulk, double transition_quantile, dist::GpParams tail);

  double cdf(std::int64_t y) const override;
  std::int64_t quantile(double p) const override;

  const BulkCdf& bulk() const { return bulk_; }
  bool has_tail() const { return tail_.has_value(); }
  const std::optional<dist::GpParams>& tail() const { return tail_; }
  std::int64_t splice_floor() const { return floor_; }
  std::int64_t splice_ceil() const { return ceil_; }
  double alpha_tilde() const { return alpha_tilde_; }
  /// Set when the bulk saturated before the splice and the tail was dropped.
  bool saturated() const { return saturated_; }

 private:
  BulkCdf bulk_;
  std::optional<dist::GpParams> tail_;
  std::int64_t floor_ = 0;
  std::int64_t ceil_ = 0;
  double alpha_tilde_ = 1.0;
  bool saturated_ = false;
};

PredictiveDistribution splice_cdf(const QuantileVector& bulk_quantiles, double alpha_T,
                                  const TailModel& tail, const CovariateMap& x);
/// Same, with the tail scale already evaluated.
PredictiveDistribution splice_cdf(const QuantileVector& bulk_quantiles, double alpha_T,
                                  const dist::GpParams& tail);
/// The bulk quantile regression alone, as a distribution.
PredictiveDistribution bulk_only_distribution(const QuantileVector& bulk_quantiles);

double dist_cdf(const CountDistribution& d, std::int64_t y);
std::int64_t dist_quantile(const CountDistribution& d, double p);
std::vector<std::int64_t> dist_sample(const CountDistribution& d, std::size_t n, std::uint64_t seed);

}  // namespace xflex
