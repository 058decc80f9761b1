#pragma once

// Verification of forecast records against observed counts, and hindcast
// cross-validation over regulatory-year folds.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xflex/pipeline/forecast.hpp"
#include "xflex/scoring.hpp"

namespace xflex::pipeline {

ForecastOutput output_from_record(const nlohmann::json& record);
/// One JSON object per line; blank lines skipped.
std::vector<ForecastOutput> read_records(const std::string& path);
void write_records(const std::vector<ForecastOutput>& forecasts, const std::string& path);

/// The seven pinball levels.
std::vector<double> pinball_levels();

struct EvaluateOptions {
  std::string baseline_source = "eps+hres";
  int baseline_lead = 0;
  std::size_t twcrps_samples = 100000;
  std::uint64_t seed = 1;
  std::vector<double> reliability_levels{0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99};
};

struct ReliabilityEntry {
  std::string source;
  int lead_hours = 0;
  std::string model;  ///< "flex" or "bulk_only"
  ReliabilityTable table;
};

struct EvaluationReport {
  ScoreReport scores;  ///< per district, lead and source
  ScoreReport scaled;  ///< pinball rows over the baseline
  std::vector<ReliabilityEntry> reliability;  ///< pooled over districts
  std::size_t cases = 0;
  std::size_t twcrps_degenerate = 0;  ///< bulk-only support ends below a

  nlohmann::json to_json() const;
  /// Value of one score row; NaN when absent.
  double score(const std::string& district, int lead_hours, const std::string& source,
               const std::string& metric) const;
};

/// Every forecast must have an observation for its (district, date).
EvaluationReport evaluate(const std::vector<ForecastOutput>& forecasts,
                          const std::vector<FaultRow>& observations,
                          const std::map<std::string, BandSpec>& bands,
                          const EvaluateOptions& options = {});

/// scores.json, scores.csv and reliability.csv in `dir`.
void write_report(const EvaluationReport& report, const std::string& dir);

struct CvOptions {
  std::vector<ForecastMode> modes{ForecastMode::EpsHres};
  std::vector<int> leads;  ///< empty: every lead present in the weather file
  bool strict = false;
};

/// One row per evaluated forecast: which year it is in and which years the
/// model that produced it was trained on.
struct LeakageRecord {
  std::string district;
  std::string fold;
  std::vector<int> evaluated_years;
  std::vector<int> training_years;
  bool leaked() const;
};

struct CvResult {
  std::vector<ForecastOutput> forecasts;
  std::vector<LeakageRecord> audit;
  bool leakage_free() const;
};

/// Leave-one-regulatory-year-out hindcasts per district: reanalysis-driven
/// forecasts (source "reanalysis", lead 0) plus NWP forecasts for every mode
/// and lead present in the weather rows.
CvResult run_cv(const std::vector<FaultRow>& faults, const std::vector<WeatherRow>& weather,
                const std::map<std::string, BandSpec>& bands, const PipelineConfig& config,
                const CvOptions& options = {});

}  // namespace xflex::pipeline
