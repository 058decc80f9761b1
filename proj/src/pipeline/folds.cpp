#include "xflex/pipeline/folds.hpp"

#include <algorithm>
#include <cstdio>

#include "xflex/errors.hpp"

namespace xflex::pipeline {

using namespace std::chrono;

int regulatory_year(const Date& d) {
  const int y = static_cast<int>(d.year());
  return d.month() >= April ? y : y - 1;
}

std::string regulatory_label(int start_year) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%d/%02d", start_year, (start_year + 1) % 100);
  return buf;
}

FoldPlan make_folds(const std::vector<Date>& dates) {
  if (dates.empty()) throw ValidationError("cannot build folds from an empty date range");
  const auto [lo, hi] = std::minmax_element(dates.begin(), dates.end());
  FoldPlan plan;
  for (int y = regulatory_year(*lo); y <= regulatory_year(*hi); ++y) {
    Fold f;
    f.start_year = y;
    f.label = regulatory_label(y);
    const Date open = year{y} / April / 1;
    const Date close = year{y + 1} / March / 31;
    f.first = std::max(open, *lo);
    f.last = std::min(close, *hi);
    plan.folds.push_back(f);
  }
  return plan;
}

std::optional<std::size_t> FoldPlan::fold_of(const Date& d) const {
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i].first <= d && d <= folds[i].last) return i;
  }
  return std::nullopt;
}

}  // namespace xflex::pipeline
