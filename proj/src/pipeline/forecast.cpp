#include "xflex/pipeline/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "xflex/ensemble.hpp"
#include "xflex/errors.hpp"

namespace xflex::pipeline {

namespace {

constexpr double kTableLevel = 1.0 - 1e-6;
constexpr std::int64_t kTableCap = 100000;

nlohmann::json probs_json(const BandProbabilities& p) {
  return {{"green", p.p_green}, {"amber", p.p_amber}, {"red", p.p_red}};
}

}  // namespace

TabulatedDistribution::TabulatedDistribution(std::vector<double> cdf) : table_(std::move(cdf)) {
  if (table_.empty()) throw ValidationError("empty CDF table");
  for (std::size_t k = 1; k < table_.size(); ++k) {
    if (!(table_[k] >= table_[k - 1])) throw ValidationError("CDF table is not nondecreasing");
  }
}

double TabulatedDistribution::cdf(std::int64_t y) const {
  if (y < 0) return 0.0;
  if (static_cast<std::size_t>(y) >= table_.size()) return 1.0;
  return table_[static_cast<std::size_t>(y)];
}

std::int64_t TabulatedDistribution::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
  const auto it = std::lower_bound(table_.begin(), table_.end(), p);
  return static_cast<std::int64_t>(it - table_.begin());
}

std::shared_ptr<const TabulatedDistribution> tabulate(const CountDistribution& d, bool* truncated) {
  std::int64_t top = 0;
  try {
    top = d.quantile(kTableLevel);
  } catch (const ValidationError&) {
    top = kTableCap;
  }
  if (truncated) *truncated = top >= kTableCap;
  top = std::min(top, kTableCap);
  return std::make_shared<TabulatedDistribution>(d.cdf_table(top));
}

ForecastMode parse_mode(const std::string& name) {
  if (name == "eps+hres") return ForecastMode::EpsHres;
  if (name == "eps") return ForecastMode::Eps;
  if (name == "hres") return ForecastMode::Hres;
  throw ValidationError("unknown forecast mode '" + name + "' (expected eps+hres, eps or hres)");
}

std::string mode_name(ForecastMode mode) {
  switch (mode) {
    case ForecastMode::EpsHres:
      return "eps+hres";
    case ForecastMode::Eps:
      return "eps";
    case ForecastMode::Hres:
      return "hres";
  }
  return "";
}

std::vector<double> record_levels() { return {0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999}; }

ForecastOutput forecast(const ModelBundle& bundle, const std::vector<WeatherRow>& rows,
                        ForecastMode mode, bool strict) {
  std::vector<const WeatherRow*> used;
  for (const auto& r : rows) {
    const int id = member_id(r.source);
    if (id < 0) continue;
    if (mode == ForecastMode::Hres && id != 0) continue;
    if (mode == ForecastMode::Eps && id == 0) continue;
    used.push_back(&r);
  }
  if (used.empty()) throw ValidationError("no NWP members available for the forecast");
  const auto& first = *used.front();
  for (const auto* r : used) {
    if (r->district != first.district || r->date != first.date || r->lead_hours != first.lead_hours) {
      throw ValidationError("forecast rows must share district, date and lead time");
    }
  }
  const std::size_t expected = mode == ForecastMode::Hres ? 1 : mode == ForecastMode::Eps ? 50 : 51;
  if (strict && used.size() != expected) {
    throw ValidationError("missing members for " + first.district + " " + format_date(first.date) +
                          " lead " + std::to_string(first.lead_hours) + ": have " +
                          std::to_string(used.size()) + " of " + std::to_string(expected));
  }
  // Fixed member order keeps the averaging independent of row order.
  std::sort(used.begin(), used.end(),
            [](auto* a, auto* b) { return member_id(a->source) < member_id(b->source); });

  const WeightSchedule schedule = mode == ForecastMode::Eps ? WeightSchedule::flat() : WeightSchedule{};
  const MemberWeights mw = member_weights(first.lead_hours, schedule);

  std::vector<MemberForecast> flex_members;
  std::vector<MemberForecast> bulk_members;
  double weight_sum = 0.0, wind = 0.0, q_t = 0.0;
  for (const auto* r : used) {
    const int id = member_id(r->source);
    const double w = id == 0 ? mw.hres : mw.member;
    flex_members.push_back({id, r->lead_hours, std::make_shared<PredictiveDistribution>(bundle.predict(r->covariates))});
    bulk_members.push_back(
        {id, r->lead_hours, std::make_shared<PredictiveDistribution>(bundle.predict_bulk_only(r->covariates))});
    weight_sum += w;
    wind += w * require_covariate(r->covariates, bundle.wind_covariate());
    q_t += w * predict_quantiles(bundle.bulk(), r->covariates).at(bundle.alpha_T());
  }

  ForecastOutput out;
  out.district = first.district;
  out.date = first.date;
  out.lead_hours = first.lead_hours;
  out.source = mode_name(mode);
  out.members = used.size();
  if (used.size() == 1) {
    out.flex = flex_members.front().dist;
    out.bulk_only = bulk_members.front().dist;
  } else {
    out.flex = std::make_shared<CombinedDistribution>(combine(flex_members, schedule));
    out.bulk_only = std::make_shared<CombinedDistribution>(combine(bulk_members, schedule));
  }
  out.probs = band_probs(*out.flex, bundle.bands());
  out.bulk_only_probs = band_probs(*out.bulk_only, bundle.bands());
  out.band = assign_band(out.probs);
  out.twcrps_threshold = std::floor(q_t / weight_sum);
  out.wind = wind / weight_sum;
  out.wind_p80 = bundle.wind_p80();
  return out;
}

ForecastOutput forecast_single(const ModelBundle& bundle, const std::string& district, const Date& date,
                               const CovariateMap& x, const std::string& source, int lead_hours) {
  ForecastOutput out;
  out.district = district;
  out.date = date;
  out.lead_hours = lead_hours;
  out.source = source;
  out.members = 1;
  out.flex = std::make_shared<PredictiveDistribution>(bundle.predict(x));
  out.bulk_only = std::make_shared<PredictiveDistribution>(bundle.predict_bulk_only(x));
  out.probs = band_probs(*out.flex, bundle.bands());
  out.bulk_only_probs = band_probs(*out.bulk_only, bundle.bands());
  out.band = assign_band(out.probs);
  out.twcrps_threshold = std::floor(predict_quantiles(bundle.bulk(), x).at(bundle.alpha_T()));
  out.wind = require_covariate(x, bundle.wind_covariate());
  out.wind_p80 = bundle.wind_p80();
  return out;
}

std::map<WeatherKey, std::vector<WeatherRow>> group_nwp(const std::vector<WeatherRow>& rows) {
  std::map<WeatherKey, std::vector<WeatherRow>> groups;
  for (const auto& r : rows) {
    if (member_id(r.source) < 0) continue;
    groups[{r.district, std::chrono::sys_days(r.date), r.lead_hours}].push_back(r);
  }
  return groups;
}

nlohmann::json forecast_record(const ForecastOutput& f) {
  nlohmann::json j;
  j["district"] = f.district;
  j["date"] = format_date(f.date);
  j["lead_hours"] = f.lead_hours;
  j["source"] = f.source;
  j["members"] = f.members;
  j["twcrps_threshold"] = f.twcrps_threshold;
  j["wind"] = f.wind;
  j["wind_p80"] = f.wind_p80;
  j["band"] = std::string(1, band_letter(f.band));
  j["band_bulk_only"] = std::string(1, band_letter(assign_band(f.bulk_only_probs)));
  j["probs"] = probs_json(f.probs);
  j["probs_bulk_only"] = probs_json(f.bulk_only_probs);
  const auto levels = record_levels();
  nlohmann::json q = nlohmann::json::array(), qb = nlohmann::json::array();
  for (double p : levels) {
    q.push_back(f.flex->quantile(p));
    qb.push_back(f.bulk_only->quantile(p));
  }
  j["levels"] = levels;
  j["quantiles"] = q;
  j["quantiles_bulk_only"] = qb;
  bool trunc_flex = false, trunc_bulk = false;
  j["cdf"] = tabulate(*f.flex, &trunc_flex)->table();
  j["cdf_bulk_only"] = tabulate(*f.bulk_only, &trunc_bulk)->table();
  j["cdf_truncated"] = trunc_flex || trunc_bulk;
  return j;
}

}  // namespace xflex::pipeline
