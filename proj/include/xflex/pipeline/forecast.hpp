#pragma once

// Ensemble forecasting: each NWP member goes through the bundle, then the
// member distributions are quantile-averaged with lead-time weights and the
// result is banded.

#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "xflex/banding.hpp"
#include "xflex/pipeline/bundle.hpp"
#include "xflex/pipeline/io.hpp"

namespace xflex::pipeline {

enum class ForecastMode { EpsHres, Eps, Hres };

ForecastMode parse_mode(const std::string& name);  ///< "eps+hres", "eps", "hres"
std::string mode_name(ForecastMode mode);

struct ForecastOutput {
  std::string district;
  Date date;
  int lead_hours = 0;
  std::string source;  ///< mode name, or "reanalysis" for hindcasts
  std::size_t members = 0;
  std::shared_ptr<const CountDistribution> flex;
  std::shared_ptr<const CountDistribution> bulk_only;
  BandProbabilities probs;
  BandProbabilities bulk_only_probs;
  Band band = Band::Green;
  double twcrps_threshold = 0.0;  ///< floor of the alpha_T bulk quantile
  double wind = 0.0;
  double wind_p80 = 0.0;
};

/// `rows` are the weather rows of one district, date and lead. Rows whose
/// source the mode does not use are ignored. In strict mode every member the
/// mode needs must be present.
ForecastOutput forecast(const ModelBundle& bundle, const std::vector<WeatherRow>& rows,
                        ForecastMode mode, bool strict = false);

/// Single-input forecast (hindcast on reanalysis covariates).
ForecastOutput forecast_single(const ModelBundle& bundle, const std::string& district, const Date& date,
                               const CovariateMap& x, const std::string& source, int lead_hours);

using WeatherKey = std::tuple<std::string, std::chrono::sys_days, int>;
/// NWP rows grouped by (district, date, lead); reanalysis rows are skipped.
std::map<WeatherKey, std::vector<WeatherRow>> group_nwp(const std::vector<WeatherRow>& rows);

/// Integer distribution stored as its CDF values at 0..n-1; past the end
/// the CDF is 1.
class TabulatedDistribution : public CountDistribution {
 public:
  explicit TabulatedDistribution(std::vector<double> cdf);
  double cdf(std::int64_t y) const override;
  std::int64_t quantile(double p) const override;
  const std::vector<double>& table() const { return table_; }

 private:
  std::vector<double> table_;
};

/// CDF table up to the 1 - 1e-6 quantile, capped at 100000 entries.
/// `truncated` is set when the cap was hit.
std::shared_ptr<const TabulatedDistribution> tabulate(const CountDistribution& d, bool* truncated = nullptr);

/// Levels written to forecast records.
std::vector<double> record_levels();

/// JSON record with quantiles, band probabilities and CDF tables for both
/// the spliced and the bulk-only forecast.
nlohmann::json forecast_record(const ForecastOutput& f);

}  // namespace xflex::pipeline
