#pragma once

// CSV ingestion for fault counts and weather covariates.
//
//   faults:  district,date,count
//   weather: district,date,source,lead_h,<covariate columns...>
//
// source is "reanalysis", "hres" or "m01".."m50".

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "xflex/data.hpp"

namespace xflex::pipeline {

using Date = std::chrono::year_month_day;

/// Strict ISO-8601 calendar date (YYYY-MM-DD).
Date parse_date(const std::string& text);
std::string format_date(const Date& d);

struct FaultRow {
  std::string district;
  Date date;
  std::int64_t count = 0;
};

struct WeatherRow {
  std::string district;
  Date date;
  std::string source;
  int lead_hours = 0;
  CovariateMap covariates;
};

/// 0 for "hres", 1..50 for "m01".."m50"; -1 for "reanalysis".
int member_id(const std::string& source);
bool is_valid_source(const std::string& source);

/// Rejects duplicate (district, date), negative counts and a wrong header.
std::vector<FaultRow> load_faults(const std::string& path);
/// Rejects duplicate (district, date, source, lead_h) and unknown sources.
std::vector<WeatherRow> load_weather(const std::string& path);

/// Training rows of one district: reanalysis covariates joined to counts.
struct TrainingSet {
  std::string district;
  Frame frame;
  std::vector<Date> dates;
};

/// Joins counts with the reanalysis rows of `district`. Any requested
/// covariate missing on a joined row raises ValidationError naming the row.
TrainingSet join_training(const std::vector<FaultRow>& faults,
                          const std::vector<WeatherRow>& weather, const std::string& district,
                          const std::vector<std::string>& covariates);

/// Sorted distinct districts present in the fault rows.
std::vector<std::string> districts(const std::vector<FaultRow>& faults);

}  // namespace xflex::pipeline
