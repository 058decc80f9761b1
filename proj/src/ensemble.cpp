#include "xflex/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "xflex/errors.hpp"

namespace xflex {

void WeightSchedule::validate() const {
  if (!(hres_weight_at_0 > 0.0) || !(member_weight > 0.0) || taper_end_hours <= 0) {
    throw ValidationError("weight schedule needs positive weights and taper end");
  }
}

MemberWeights member_weights(int lead_hours, const WeightSchedule& schedule) {
  schedule.validate();
  if (lead_hours < 0) throw ValidationError("lead time must be nonnegative");
  const double frac =
      static_cast<double>(std::min(lead_hours, schedule.taper_end_hours)) / schedule.taper_end_hours;
  return {schedule.hres_weight_at_0 - (schedule.hres_weight_at_0 - schedule.member_weight) * frac,
          schedule.member_weight};
}

std::vector<double> default_probability_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 199; ++i) grid.push_back(i / 200.0);
  return grid;
}

std::vector<double> vincentize(const std::vector<std::vector<double>>& member_quantiles,
                               const std::vector<double>& weights) {
  if (member_quantiles.empty() || member_quantiles.size() != weights.size()) {
    throw ValidationError("one weight per member is required");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ValidationError("member weights must be positive");
    total += w;
  }
  const std::size_t m = member_quantiles.front().size();
  std::vector<double> out(m, 0.0);
  for (std::size_t j = 0; j < member_quantiles.size(); ++j) {
    if (member_quantiles[j].size() != m) throw ValidationError("members must share the grid");
    for (std::size_t i = 0; i < m; ++i) out[i] += weights[j] / total * member_quantiles[j][i];
  }
  return out;
}

namespace {

BulkCdf interp_from_grid(const std::vector<double>& grid, const std::vector<double>& values) {
  QuantileVector qv{grid, values};
  return build_bulk_cdf(qv);
}

}  // namespace

CombinedDistribution::CombinedDistribution(
    std::vector<double> grid, std::vector<double> grid_quantiles,
    std::vector<std::shared_ptr<const CountDistribution>> members, std::vector<double> weights)
    : grid_(std::move(grid)), grid_quantiles_(std::move(grid_quantiles)),
      members_(std::move(members)), weights_(std::move(weights)) {
  if (grid_.empty() || grid_.size() != grid_quantiles_.size()) {
    throw ValidationError("combined grid and quantiles must align");
  }
  double total = 0.0;
  for (double w : weights_) total += w;
  for (double& w : weights_) w /= total;
  interp_ = interp_from_grid(grid_, grid_quantiles_);
}

double CombinedDistribution::averaged_quantile(double p) const {
  double q = 0.0;
  for (std::size_t j = 0; j < members_.size(); ++j) {
    q += weights_[j] * static_cast<double>(members_[j]->quantile(p));
  }
  return q;
}

std::int64_t CombinedDistribution::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability must lie in [0, 1]");
  if (p > grid_.back()) {
    const double top = grid_quantiles_.back();
    return static_cast<std::int64_t>(std::max(top, std::round(averaged_quantile(p))));
  }
  return CountDistribution::quantile(p);
}

double CombinedDistribution::cdf(std::int64_t y) const {
  if (y < 0) return 0.0;
  const double yd = static_cast<double>(y);
  const double top_level = grid_.back();
  if (yd < grid_quantiles_.back()) return interp_(yd);
  // sup{p : round(averaged_quantile(p)) <= y} by bisection above the grid.
  double lo = top_level;
  double hi = 1.0;
  if (std::round(averaged_quantile(std::nextafter(1.0, 0.0))) <= yd) return 1.0;
  for (int i = 0; i < 60 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::round(averaged_quantile(mid)) <= yd) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::vector<double> CombinedDistribution::cdf_table(std::int64_t top) const {
  std::vector<double> t(static_cast<std::size_t>(std::max<std::int64_t>(top + 1, 0)));
  std::size_t y = 0;
  for (; y < t.size() && static_cast<double>(y) < grid_quantiles_.back(); ++y) t[y] = interp_(static_cast<double>(y));
  if (y == t.size()) return t;

  // Above the grid the averaged quantile is a step function of p that only
  // moves where some member CDF value is crossed. Walk those crossings in
  // order; the CDF at y is the last crossing before round(average) exceeds y.
  const std::size_t m = members_.size();
  std::vector<std::int64_t> k(m);
  std::vector<double> f(m);
  for (std::size_t j = 0; j < m; ++j) {
    k[j] = members_[j]->quantile(grid_.back());
    f[j] = members_[j]->cdf(k[j]);
  }
  auto average = [&] {
    double a = 0.0;
    for (std::size_t j = 0; j < m; ++j) a += weights_[j] * static_cast<double>(k[j]);
    return a;
  };
  double a = average();
  double last = grid_.back();
  for (; y < t.size(); ++y) {
    const double yd = static_cast<double>(y);
    while (std::round(a) <= yd) {
      const double event = *std::min_element(f.begin(), f.end());
      if (event >= 1.0) {
        std::fill(t.begin() + static_cast<std::ptrdiff_t>(y), t.end(), 1.0);
        return t;
      }
      for (std::size_t j = 0; j < m; ++j) {
        if (f[j] != event) continue;
        while (f[j] <= event) f[j] = members_[j]->cdf(++k[j]);
      }
      a = average();
      last = event;
    }
    t[y] = last;
  }
  return t;
}

CombinedDistribution combine(const std::vector<MemberForecast>& members,
                             const WeightSchedule& schedule, const std::vector<double>& prob_grid) {
  if (members.empty()) throw ValidationError("combine needs at least one member");
  std::set<int> ids;
  for (const auto& m : members) {
    if (!ids.insert(m.member_id).second) {
      throw ValidationError("duplicate member id " + std::to_string(m.member_id));
    }
    if (m.lead_hours != members.front().lead_hours) {
      throw ValidationError("members must share one lead time");
    }
    if (!m.dist) throw ValidationError("member without a distribution");
  }
  const MemberWeights w = member_weights(members.front().lead_hours, schedule);

  std::vector<std::vector<double>> quantiles;
  std::vector<double> weights;
  std::vector<std::shared_ptr<const CountDistribution>> dists;
  for (const auto& m : members) {
    std::vector<double> q(prob_grid.size());
    for (std::size_t i = 0; i < prob_grid.size(); ++i) {
      q[i] = static_cast<double>(m.dist->quantile(prob_grid[i]));
    }
    quantiles.push_back(std::move(q));
    weights.push_back(m.member_id == 0 ? w.hres : w.member);
    dists.push_back(m.dist);
  }
  std::vector<double> avg = vincentize(quantiles, weights);
  double running = 0.0;
  for (double& v : avg) {
    v = std::max(running, std::round(v));
    running = v;
  }
  return CombinedDistribution(prob_grid, std::move(avg), std::move(dists), std::move(weights));
}

}  // namespace xflex
