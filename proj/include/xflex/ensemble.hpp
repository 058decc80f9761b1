#pragma once

// Lead-time weighted quantile averaging (Vincentization) of member forecasts.
// The HRES/control member starts at weight 50 and tapers linearly to the
// member weight at 72 h.

#include <memory>
#include <utility>
#include <vector>

#include "xflex/splice.hpp"

namespace xflex {

struct WeightSchedule {
  double hres_weight_at_0 = 50.0;
  int taper_end_hours = 72;
  double member_weight = 1.0;

  void validate() const;
  /// Every member weighted equally at every lead (EPS-only mode).
  static WeightSchedule flat() { return {1.0, 72, 1.0}; }
};

struct MemberForecast {
  int member_id = 0;  ///< 0 = HRES/control, 1..50 ensemble
  int lead_hours = 0;
  std::shared_ptr<const CountDistribution> dist;
};

struct MemberWeights {
  double hres = 0.0;
  double member = 0.0;
};

MemberWeights member_weights(int lead_hours, const WeightSchedule& schedule = {});

/// The 199 levels 0.005, 0.010, ..., 0.995.
std::vector<double> default_probability_grid();

/// Weighted mean of member quantiles at each level, before rounding.
/// member_quantiles[j][i] is member j at level i; weights need not sum to 1.
std::vector<double> vincentize(const std::vector<std::vector<double>>& member_quantiles,
                               const std::vector<double>& weights);

/// Combined forecast: rounded averaged quantiles on the grid with a running
/// maximum, interpolated like the bulk CDF. Above the top grid level the
/// quantile function is the rounded weighted mean of member quantiles at the
/// requested level.
class CombinedDistribution : public CountDistribution {
 public:
  CombinedDistribution(std::vector<double> grid, std::vector<double> grid_quantiles,
                       std::vector<std::shared_ptr<const CountDistribution>> members,
                       std::vector<double> weights);

  double cdf(std::int64_t y) const override;
  std::int64_t quantile(double p) const override;
  /// Exact sweep over the member CDF jumps; much cheaper than repeated cdf().
  std::vector<double> cdf_table(std::int64_t top) const override;

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& grid_quantiles() const { return grid_quantiles_; }

 private:
  double averaged_quantile(double p) const;

  std::vector<double> grid_;
  std::vector<double> grid_quantiles_;
  BulkCdf interp_;
  std::vector<std::shared_ptr<const CountDistribution>> members_;
  std::vector<double> weights_;  // normalized
};

/// Throws ValidationError on an empty list, duplicate ids or mixed leads.
CombinedDistribution combine(const std::vector<MemberForecast>& members,
                             const WeightSchedule& schedule = {},
                             const std::vector<double>& prob_grid = default_probability_grid());

}  // namespace xflex
