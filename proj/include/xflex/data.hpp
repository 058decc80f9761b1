#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace xflex {

/// Named covariate values for one forecast case.
using CovariateMap = std::map<std::string, double>;

/// Column-oriented training data: counts plus named covariate columns of
/// equal length.
struct Frame {
  std::vector<std::int64_t> counts;
  std::map<std::string, std::vector<double>> columns;

  std::size_t size() const { return counts.size(); }
  /// Throws ValidationError naming the column if it is absent.
  const std::vector<double>& column(const std::string& name) const;
  CovariateMap row(std::size_t i) const;
  Frame subset(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

/// Looks up `name`, throwing ValidationError("missing covariate ...").
double require_covariate(const CovariateMap& x, const std::string& name);

}  // namespace xflex
