#include "xflex/splice.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xflex/errors.hpp"

namespace xflex {

namespace {

void check_level(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability must lie in [0, 1]");
}

// Smallest k in [lo, hi] with pred(k); pred is monotone and pred(hi) holds.
template <typename Pred>
std::int64_t first_true(std::int64_t lo, std::int64_t hi, Pred pred) {
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace

std::int64_t CountDistribution::quantile(double p) const {
  check_level(p);
  if (cdf(0) >= p) return 0;
  std::int64_t hi = 1;
  while (cdf(hi) < p) {
    if (hi > (std::int64_t{1} << 60)) throw ValidationError("unbounded quantile");
    hi *= 2;
  }
  return first_true(hi / 2, hi, [&](std::int64_t k) { return cdf(k) >= p; });
}

std::vector<double> CountDistribution::cdf_table(std::int64_t top) const {
  std::vector<double> t(static_cast<std::size_t>(std::max<std::int64_t>(top + 1, 0)));
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = cdf(static_cast<std::int64_t>(k));
  return t;
}

std::vector<std::int64_t> CountDistribution::sample(std::size_t n, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int64_t> out(n);
  for (auto& v : out) v = quantile(unif(rng));
  return out;
}

BulkCdf::BulkCdf(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw ValidationError("bulk CDF needs at least one quantile knot");
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i].first > knots_[i - 1].first) || knots_[i].second < knots_[i - 1].second) {
      throw ValidationError("bulk CDF knots must increase");
    }
  }
}

double BulkCdf::operator()(double y) const {
  if (y <= knots_.front().first) return 0.0;
  const auto& last = knots_.back();
  if (y >= last.first) {
    const auto& prev = knots_[knots_.size() - 2];
    const double slope = (last.second - prev.second) / (last.first - prev.first);
    return std::min(1.0, last.second + slope * (y - last.first));
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), y,
                                   [](double v, const auto& k) { return v < k.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  return lo.second + (hi.second - lo.second) * (y - lo.first) / (hi.first - lo.first);
}

BulkCdf build_bulk_cdf(const QuantileVector& quantiles) {
  if (quantiles.levels.empty() || quantiles.levels.size() != quantiles.values.size()) {
    throw ValidationError("bulk CDF needs a non-empty quantile grid");
  }
  std::vector<std::pair<double, double>> knots{{-1.0, 0.0}};
  for (std::size_t i = 0; i < quantiles.levels.size(); ++i) {
    const double v = quantiles.values[i];
    const double a = quantiles.levels[i];
    if (!std::isfinite(v)) throw ValidationError("bulk quantiles must be finite");
    if (v < knots.back().first) throw ValidationError("bulk quantiles must be nondecreasing");
    if (v == knots.back().first) {
      knots.back().second = std::max(knots.back().second, a);
    } else {
      knots.emplace_back(v, a);
    }
  }
  return BulkCdf(std::move(knots));
}

PredictiveDistribution::PredictiveDistribution(BulkCdf bulk) : bulk_(std::move(bulk)) {}

PredictiveDistribution::PredictiveDistribution(BulkCdf bulk, double transition_quantile,
                                               dist::GpParams tail)
    : bulk_(std::move(bulk)) {
  tail.validate();
  if (!std::isfinite(transition_quantile) || transition_quantile < 0.0) {
    throw ValidationError("transition quantile must be finite and nonnegative");
  }
  floor_ = static_cast<std::int64_t>(std::floor(transition_quantile));
  ceil_ = static_cast<std::int64_t>(std::ceil(transition_quantile));
  alpha_tilde_ = bulk_(static_cast<double>(floor_));
  if (alpha_tilde_ >= 1.0) {
    saturated_ = true;
    return;
  }
  tail_ = tail;
}

double PredictiveDistribution::cdf(std::int64_t y) const {
  if (y < 0) return 0.0;
  if (tail_ && y >= ceil_) {
    return alpha_tilde_ + (1.0 - alpha_tilde_) * dist::dgp_cdf(y - ceil_, *tail_);
  }
  return bulk_(static_cast<double>(y));
}

std::int64_t PredictiveDistribution::quantile(double p) const {
  check_level(p);
  if (!tail_) return CountDistribution::quantile(p);
  if (p <= 0.0) return 0;
  if (ceil_ > 0 && bulk_(static_cast<double>(ceil_ - 1)) >= p) {
    return first_true(0, ceil_ - 1, [&](std::int64_t k) { return bulk_(static_cast<double>(k)) >= p; });
  }
  if (p >= 1.0) {
    const auto top = dist::dgp_support_max(*tail_);
    if (!top) throw ValidationError("quantile at level 1 is unbounded for a tail with xi >= 0");
    return ceil_ + *top;
  }
  const double r = std::clamp((p - alpha_tilde_) / (1.0 - alpha_tilde_), 0.0, 1.0);
  std::int64_t j = r >= 1.0 ? *dist::dgp_support_max(*tail_) : dist::dgp_quantile(r, *tail_);
  while (cdf(ceil_ + j) < p) ++j;
  while (j > 0 && cdf(ceil_ + j - 1) >= p) --j;
  return ceil_ + j;
}

PredictiveDistribution splice_cdf(const QuantileVector& bulk_quantiles, double alpha_T,
                                  const dist::GpParams& tail) {
  const double q = bulk_quantiles.at(alpha_T);
  return PredictiveDistribution(build_bulk_cdf(bulk_quantiles), q, tail);
}

PredictiveDistribution splice_cdf(const QuantileVector& bulk_quantiles, double alpha_T,
                                  const TailModel& tail, const CovariateMap& x) {
  return splice_cdf(bulk_quantiles, alpha_T, dist::GpParams{tail_scale(tail, x), tail.xi()});
}

PredictiveDistribution bulk_only_distribution(const QuantileVector& bulk_quantiles) {
  return PredictiveDistribution(build_bulk_cdf(bulk_quantiles));
}

double dist_cdf(const CountDistribution& d, std::int64_t y) { return d.cdf(y); }

std::int64_t dist_quantile(const CountDistribution& d, double p) { return d.quantile(p); }

std::vector<std::int64_t> dist_sample(const CountDistribution& d, std::size_t n, std::uint64_t seed) {
  return d.sample(n, seed);
}

}  // namespace xflex
