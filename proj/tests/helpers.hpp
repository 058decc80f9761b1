#pragma once

#include <cstdint>
#include <vector>

#include "xflex/splice.hpp"

namespace testing {

class PointMass : public xflex::CountDistribution {
 public:
  explicit PointMass(std::int64_t at) : at_(at) {}
  double cdf(std::int64_t y) const override { return y >= at_ ? 1.0 : 0.0; }

 private:
  std::int64_t at_;
};

/// Uniform on {lo, ..., hi}.
class UniformCount : public xflex::CountDistribution {
 public:
  UniformCount(std::int64_t lo, std::int64_t hi) : lo_(lo), hi_(hi) {}
  double cdf(std::int64_t y) const override {
    if (y < lo_) return 0.0;
    if (y >= hi_) return 1.0;
    return static_cast<double>(y - lo_ + 1) / static_cast<double>(hi_ - lo_ + 1);
  }

 private:
  std::int64_t lo_, hi_;
};

/// Arbitrary distribution given by its pmf on 0..n-1.
class TableCount : public xflex::CountDistribution {
 public:
  explicit TableCount(std::vector<double> pmf) {
    double c = 0.0;
    for (double p : pmf) cdf_.push_back(c += p);
    for (double& v : cdf_) v /= c;
    cdf_.back() = 1.0;
  }
  double cdf(std::int64_t y) const override {
    if (y < 0) return 0.0;
    if (static_cast<std::size_t>(y) >= cdf_.size()) return 1.0;
    return cdf_[static_cast<std::size_t>(y)];
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace testing
