#pragma once

// Regulatory-year folds: April 1 to March 31.

#include <optional>
#include <string>
#include <vector>

#include "xflex/pipeline/io.hpp"

namespace xflex::pipeline {

struct Fold {
  std::string label;  ///< "2010/11" for the year starting April 2010
  int start_year = 0; ///< calendar year of the April that opens the fold
  Date first;         ///< first date covered, clipped to the data
  Date last;          ///< last date covered, clipped to the data
};

struct FoldPlan {
  std::vector<Fold> folds;
  /// Index of the fold containing `d`, or nullopt.
  std::optional<std::size_t> fold_of(const Date& d) const;
};

/// Regulatory year of a date: the calendar year of the preceding April 1.
int regulatory_year(const Date& d);
std::string regulatory_label(int start_year);

/// One fold per regulatory year intersecting [min(dates), max(dates)].
/// Throws ValidationError on an empty list.
FoldPlan make_folds(const std::vector<Date>& dates);

}  // namespace xflex::pipeline
