#pragma once

// Forecast verification metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xflex/splice.hpp"

namespace xflex {

double pinball(double y, double q, double alpha);

double brier(double p_event, bool occurred);
/// 1 - bs / bs_ref; nullopt (undefined skill) when bs_ref == 0.
std::optional<double> brier_skill(double bs, double bs_ref);

/// Mann-Whitney AUC with midranks for ties; nullopt unless both classes occur.
std::optional<double> auc(std::span<const double> scores, std::span<const bool> labels);

struct MulticlassAuc {
  std::optional<double> micro;
  std::optional<double> macro;
  std::vector<std::optional<double>> per_class;
};

/// One-vs-rest AUCs. probs[i][c] is the forecast probability of class c for
/// case i; labels[i] is the observed class index.
MulticlassAuc multiclass_auc(const std::vector<std::vector<double>>& probs,
                             const std::vector<int>& labels);

struct ReliabilityRow {
  double level = 0.0;
  double coverage = 0.0;
  std::size_t n = 0;
  std::string condition;
  bool insufficient = false;  ///< fewer than kMinReliabilityRows selected
};
inline constexpr std::size_t kMinReliabilityRows = 20;

struct ReliabilityTable {
  std::vector<ReliabilityRow> rows;
};

/// Coverage of y <= quantile(level) over the rows where `selected` is true.
ReliabilityTable reliability(const std::vector<const CountDistribution*>& forecasts,
                             std::span<const std::int64_t> observations,
                             std::span<const double> levels, const std::vector<bool>& selected,
                             const std::string& condition = "all");
/// Same with precomputed forecast quantiles: quantiles[i][l].
ReliabilityTable reliability_from_quantiles(const std::vector<std::vector<double>>& quantiles,
                                            std::span<const std::int64_t> observations,
                                            std::span<const double> levels,
                                            const std::vector<bool>& selected,
                                            const std::string& condition = "all");

/// Threshold-weighted CRPS with weight 1{z >= a}, from forecast samples,
/// using the chaining v(z) = max(z, a):
///   mean_i |v(X_i) - v(y)| - 1/2 mean_{i,j} |v(X_i) - v(X_j)|.
/// Requires at least two samples. O(n log n).
double twcrps_sample(std::span<const std::int64_t> samples, std::int64_t y, double a);

/// Per-level RMSE across rows; estimated[i][l] vs truth[i][l].
std::vector<double> rmse_quantiles(const std::vector<std::vector<double>>& estimated,
                                   const std::vector<std::vector<double>>& truth);

/// One metric value keyed by district, lead time and forecast source.
struct ScoreRow {
  std::string district;
  int lead_hours = 0;
  std::string source;  ///< e.g. "eps+hres", "eps", "hres", "reanalysis"
  std::string metric;
  double value = 0.0;
  std::string flag;  ///< empty when the value is valid
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
};

/// Divides each row by the matching (district, metric) row at the baseline
/// source and lead. Rows without a baseline, or with a zero baseline, are
/// kept with value NaN and a flag.
ScoreReport scaled_pinball(const ScoreReport& report, const std::string& baseline_source = "eps+hres",
                           int baseline_lead = 0);

struct SpearmanResult {
  double rho = 0.0;
  double p_one_sided = 1.0;  ///< H1: rho > 0, t approximation
};
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

}  // namespace xflex
