#include "xflex/pipeline/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "xflex/errors.hpp"
#include "xflex/parallel.hpp"
#include "xflex/pipeline/folds.hpp"

namespace xflex::pipeline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const char* const kBandNames[3] = {"green", "amber", "red"};

std::string level_tag(double level) {
  std::ostringstream os;
  os << level;
  return os.str();
}

BandProbabilities probs_from_json(const nlohmann::json& j) {
  return {j.at("green").get<double>(), j.at("amber").get<double>(), j.at("red").get<double>()};
}

std::array<double, 3> as_array(const BandProbabilities& p) { return {p.p_green, p.p_amber, p.p_red}; }

std::string key_text(const std::string& district, const Date& date, int lead, const std::string& source) {
  return district + " " + format_date(date) + " lead " + std::to_string(lead) + " " + source;
}

/// Per-case scores, computed independently and aggregated afterwards.
struct CaseScores {
  std::int64_t y = 0;
  int observed_band = 0;
  std::vector<double> pinball_flex, pinball_bulk;
  std::array<double, 3> brier_flex{}, brier_bulk{};
  double tw_flex = 0.0, tw_bulk = 0.0;
  bool degenerate = false;
};

void push(ScoreReport& r, const std::tuple<std::string, int, std::string>& g, const std::string& metric,
          double value, std::string flag = {}) {
  r.rows.push_back({std::get<0>(g), std::get<1>(g), std::get<2>(g), metric, value, std::move(flag)});
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

}  // namespace

ForecastOutput output_from_record(const nlohmann::json& j) {
  try {
    ForecastOutput f;
    f.district = j.at("district").get<std::string>();
    f.date = parse_date(j.at("date").get<std::string>());
    f.lead_hours = j.at("lead_hours").get<int>();
    f.source = j.at("source").get<std::string>();
    f.members = j.at("members").get<std::size_t>();
    f.twcrps_threshold = j.at("twcrps_threshold").get<double>();
    f.wind = j.at("wind").get<double>();
    f.wind_p80 = j.at("wind_p80").get<double>();
    f.probs = probs_from_json(j.at("probs"));
    f.bulk_only_probs = probs_from_json(j.at("probs_bulk_only"));
    f.band = band_from_letter(j.at("band").get<std::string>().at(0));
    f.flex = std::make_shared<TabulatedDistribution>(j.at("cdf").get<std::vector<double>>());
    f.bulk_only = std::make_shared<TabulatedDistribution>(j.at("cdf_bulk_only").get<std::vector<double>>());
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed forecast record: ") + e.what());
  }
}

std::vector<ForecastOutput> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<ForecastOutput> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(output_from_record(j));
  }
  return out;
}

void write_records(const std::vector<ForecastOutput>& forecasts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  for (const auto& f : forecasts) out << forecast_record(f).dump() << '\n';
}

std::vector<double> pinball_levels() { return {0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999}; }

EvaluationReport evaluate(const std::vector<ForecastOutput>& forecasts,
                          const std::vector<FaultRow>& observations,
                          const std::map<std::string, BandSpec>& bands, const EvaluateOptions& options) {
  if (forecasts.empty()) throw ValidationError("no forecasts to evaluate");
  std::map<std::pair<std::string, std::chrono::sys_days>, std::int64_t> obs;
  for (const auto& o : observations) obs[{o.district, std::chrono::sys_days(o.date)}] = o.count;

  std::set<std::tuple<std::string, std::chrono::sys_days, int, std::string>> seen;
  std::vector<std::int64_t> y(forecasts.size());
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const auto& f = forecasts[i];
    if (!seen.insert({f.district, std::chrono::sys_days(f.date), f.lead_hours, f.source}).second) {
      throw ValidationError("duplicate forecast " + key_text(f.district, f.date, f.lead_hours, f.source));
    }
    const auto it = obs.find({f.district, std::chrono::sys_days(f.date)});
    if (it == obs.end()) {
      throw ValidationError("no observation for forecast " +
                            key_text(f.district, f.date, f.lead_hours, f.source));
    }
    y[i] = it->second;
  }

  const auto levels = pinball_levels();
  std::vector<CaseScores> cs(forecasts.size());
  // Every forecast is scored through its CDF table, so in-memory forecasts and
  // records read back from disk give identical reports.
  std::vector<std::shared_ptr<const TabulatedDistribution>> flex(forecasts.size()), bulk(forecasts.size());
  parallel_for(forecasts.size(), [&](std::size_t i) {
    const auto& f = forecasts[i];
    flex[i] = tabulate(*f.flex);
    bulk[i] = tabulate(*f.bulk_only);
    const BandSpec& spec = band_for(bands, f.district);
    CaseScores& c = cs[i];
    c.y = y[i];
    c.observed_band = static_cast<int>(observed_band(c.y, spec));
    for (double p : levels) {
      c.pinball_flex.push_back(pinball(static_cast<double>(c.y), static_cast<double>(flex[i]->quantile(p)), p));
      c.pinball_bulk.push_back(
          pinball(static_cast<double>(c.y), static_cast<double>(bulk[i]->quantile(p)), p));
    }
    const auto pf = as_array(f.probs);
    const auto pb = as_array(f.bulk_only_probs);
    for (int b = 0; b < 3; ++b) {
      c.brier_flex[b] = brier(std::clamp(pf[b], 0.0, 1.0), c.observed_band == b);
      c.brier_bulk[b] = brier(std::clamp(pb[b], 0.0, 1.0), c.observed_band == b);
    }
    if (options.twcrps_samples >= 2) {
      const double a = f.twcrps_threshold;
      c.degenerate = bulk[i]->cdf(static_cast<std::int64_t>(std::ceil(a)) - 1) >= 1.0 - 1e-12;
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                        static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
      std::array<std::uint64_t, 2> seeds{};
      std::array<std::uint32_t, 4> raw{};
      seq.generate(raw.begin(), raw.end());
      seeds[0] = (static_cast<std::uint64_t>(raw[0]) << 32) | raw[1];
      seeds[1] = (static_cast<std::uint64_t>(raw[2]) << 32) | raw[3];
      const auto sf = flex[i]->sample(options.twcrps_samples, seeds[0]);
      const auto sb = bulk[i]->sample(options.twcrps_samples, seeds[1]);
      c.tw_flex = twcrps_sample(sf, c.y, a);
      c.tw_bulk = twcrps_sample(sb, c.y, a);
    }
  });

  EvaluationReport report;
  report.cases = forecasts.size();
  using GroupKey = std::tuple<std::string, int, std::string>;
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    groups[{forecasts[i].district, forecasts[i].lead_hours, forecasts[i].source}].push_back(i);
  }

  ScoreReport pinball_rows;
  for (const auto& [g, idx] : groups) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      double sf = 0.0, sb = 0.0;
      for (auto i : idx) {
        sf += cs[i].pinball_flex[l];
        sb += cs[i].pinball_bulk[l];
      }
      const double n = static_cast<double>(idx.size());
      push(pinball_rows, g, "pinball_" + level_tag(levels[l]), sf / n);
      push(pinball_rows, g, "pinball_bulk_only_" + level_tag(levels[l]), sb / n);
    }
    for (int b = 0; b < 3; ++b) {
      double sf = 0.0, sb = 0.0;
      for (auto i : idx) {
        sf += cs[i].brier_flex[b];
        sb += cs[i].brier_bulk[b];
      }
      const double n = static_cast<double>(idx.size());
      push(report.scores, g, std::string("brier_") + kBandNames[b], sf / n);
      push(report.scores, g, std::string("brier_bulk_only_") + kBandNames[b], sb / n);
      const auto ss = brier_skill(sf / n, sb / n);
      push(report.scores, g, std::string("brier_skill_") + kBandNames[b], ss.value_or(kNaN),
           ss ? "" : "undefined_skill");
    }
    std::vector<std::vector<double>> pf, pb;
    std::vector<int> labels;
    for (auto i : idx) {
      const auto af = as_array(forecasts[i].probs);
      const auto ab = as_array(forecasts[i].bulk_only_probs);
      pf.emplace_back(af.begin(), af.end());
      pb.emplace_back(ab.begin(), ab.end());
      labels.push_back(cs[i].observed_band);
    }
    const auto mf = multiclass_auc(pf, labels);
    const auto mb = multiclass_auc(pb, labels);
    push(report.scores, g, "auc_micro", mf.micro.value_or(kNaN), mf.micro ? "" : "single_class");
    push(report.scores, g, "auc_macro", mf.macro.value_or(kNaN), mf.macro ? "" : "single_class");
    push(report.scores, g, "auc_micro_bulk_only", mb.micro.value_or(kNaN), mb.micro ? "" : "single_class");
    push(report.scores, g, "auc_macro_bulk_only", mb.macro.value_or(kNaN), mb.macro ? "" : "single_class");

    if (options.twcrps_samples >= 2) {
      std::vector<double> tf, tb;
      std::size_t degenerate = 0;
      for (auto i : idx) {
        if (cs[i].degenerate) {
          ++degenerate;
          continue;
        }
        tf.push_back(cs[i].tw_flex);
        tb.push_back(cs[i].tw_bulk);
      }
      report.twcrps_degenerate += degenerate;
      const double mtf = mean_of(tf), mtb = mean_of(tb);
      push(report.scores, g, "twcrps", mtf, tf.empty() ? "no_cases" : "");
      push(report.scores, g, "twcrps_bulk_only", mtb, tb.empty() ? "no_cases" : "");
      const auto skill = tb.empty() ? std::nullopt : brier_skill(mtf, mtb);
      push(report.scores, g, "twcrps_skill", skill.value_or(kNaN), skill ? "" : "undefined_skill");
      push(report.scores, g, "twcrps_degenerate", static_cast<double>(degenerate));
    }
  }
  report.scores.rows.insert(report.scores.rows.begin(), pinball_rows.rows.begin(), pinball_rows.rows.end());
  report.scaled = scaled_pinball(pinball_rows, options.baseline_source, options.baseline_lead);

  std::map<std::pair<std::string, int>, std::vector<std::size_t>> pooled;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    pooled[{forecasts[i].source, forecasts[i].lead_hours}].push_back(i);
  }
  for (const auto& [key, idx] : pooled) {
    std::vector<const CountDistribution*> df, db;
    std::vector<std::int64_t> yy;
    std::vector<bool> all(idx.size(), true), windy;
    for (auto i : idx) {
      df.push_back(flex[i].get());
      db.push_back(bulk[i].get());
      yy.push_back(y[i]);
      windy.push_back(forecasts[i].wind >= forecasts[i].wind_p80);
    }
    for (const auto& [model, dists] : {std::pair{"flex", &df}, std::pair{"bulk_only", &db}}) {
      for (const auto& [cond, sel] : {std::pair{"all", &all}, std::pair{"wind_top20", &windy}}) {
        report.reliability.push_back(
            {key.first, key.second, model, reliability(*dists, yy, options.reliability_levels, *sel, cond)});
      }
    }
  }
  return report;
}

double EvaluationReport::score(const std::string& district, int lead_hours, const std::string& source,
                               const std::string& metric) const {
  for (const auto* r : {&scores, &scaled}) {
    for (const auto& row : r->rows) {
      if (row.district == district && row.lead_hours == lead_hours && row.source == source &&
          row.metric == metric) {
        return row.value;
      }
    }
  }
  return kNaN;
}

nlohmann::json EvaluationReport::to_json() const {
  auto rows_json = [](const ScoreReport& r) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& row : r.rows) {
      nlohmann::json j{{"district", row.district}, {"lead_hours", row.lead_hours}, {"source", row.source},
                       {"metric", row.metric}};
      j["value"] = std::isfinite(row.value) ? nlohmann::json(row.value) : nlohmann::json(nullptr);
      if (!row.flag.empty()) j["flag"] = row.flag;
      a.push_back(j);
    }
    return a;
  };
  nlohmann::json rel = nlohmann::json::array();
  for (const auto& e : reliability) {
    for (const auto& row : e.table.rows) {
      rel.push_back({{"source", e.source},
                     {"lead_hours", e.lead_hours},
                     {"model", e.model},
                     {"condition", row.condition},
                     {"level", row.level},
                     {"coverage", row.n > 0 ? nlohmann::json(row.coverage) : nlohmann::json(nullptr)},
                     {"n", row.n},
                     {"insufficient", row.insufficient}});
    }
  }
  return {{"cases", cases},
          {"twcrps_degenerate", twcrps_degenerate},
          {"scores", rows_json(scores)},
          {"scaled_pinball", rows_json(scaled)},
          {"reliability", rel}};
}

void write_report(const EvaluationReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream out(base / "scores.json");
    if (!out) throw ValidationError("cannot write " + (base / "scores.json").string());
    out << report.to_json().dump(2) << '\n';
  }
  {
    std::ofstream out(base / "scores.csv");
    out << std::setprecision(10) << "district,lead_h,source,metric,value,flag\n";
    for (const auto* r : {&report.scores, &report.scaled}) {
      for (const auto& row : r->rows) {
        out << row.district << ',' << row.lead_hours << ',' << row.source << ',' << row.metric << ',';
        if (std::isfinite(row.value)) out << row.value;
        out << ',' << row.flag << '\n';
      }
    }
  }
  {
    std::ofstream out(base / "reliability.csv");
    out << std::setprecision(10) << "source,lead_h,model,condition,level,coverage,n,insufficient\n";
    for (const auto& e : report.reliability) {
      for (const auto& row : e.table.rows) {
        out << e.source << ',' << e.lead_hours << ',' << e.model << ',' << row.condition << ',' << row.level
            << ',';
        if (row.n > 0) out << row.coverage;
        out << ',' << row.n << ',' << (row.insufficient ? 1 : 0) << '\n';
      }
    }
  }
}

bool LeakageRecord::leaked() const {
  for (int y : evaluated_years) {
    if (std::find(training_years.begin(), training_years.end(), y) != training_years.end()) return true;
  }
  return false;
}

bool CvResult::leakage_free() const {
  return std::none_of(audit.begin(), audit.end(), [](const auto& r) { return r.leaked(); });
}

CvResult run_cv(const std::vector<FaultRow>& faults, const std::vector<WeatherRow>& weather,
                const std::map<std::string, BandSpec>& bands, const PipelineConfig& config,
                const CvOptions& options) {
  const auto names = districts(faults);
  if (names.empty()) throw ValidationError("no fault rows");
  const auto covs = config.covariates();

  struct DistrictData {
    TrainingSet train;
    FoldPlan plan;
  };
  std::vector<DistrictData> data;
  for (const auto& d : names) {
    TrainingSet t = join_training(faults, weather, d, covs);
    FoldPlan p = make_folds(t.dates);
    data.push_back({std::move(t), std::move(p)});
  }

  // NWP rows by (district, date) then lead.
  std::map<std::pair<std::string, std::chrono::sys_days>, std::map<int, std::vector<WeatherRow>>> nwp;
  for (auto& [key, rows] : group_nwp(weather)) {
    const int lead = std::get<2>(key);
    if (!options.leads.empty() &&
        std::find(options.leads.begin(), options.leads.end(), lead) == options.leads.end()) {
      continue;
    }
    nwp[{std::get<0>(key), std::get<1>(key)}][lead] = rows;
  }

  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t d = 0; d < data.size(); ++d) {
    for (std::size_t f = 0; f < data[d].plan.folds.size(); ++f) tasks.emplace_back(d, f);
  }
  std::vector<std::vector<ForecastOutput>> outputs(tasks.size());
  std::vector<LeakageRecord> audit(tasks.size());

  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto& dd = data[tasks[t].first];
    const Fold& fold = dd.plan.folds[tasks[t].second];
    std::vector<std::size_t> train_rows, eval_rows;
    std::set<int> train_years, eval_years;
    for (std::size_t i = 0; i < dd.train.dates.size(); ++i) {
      const int year = regulatory_year(dd.train.dates[i]);
      if (year == fold.start_year) {
        eval_rows.push_back(i);
        eval_years.insert(year);
      } else {
        train_rows.push_back(i);
        train_years.insert(year);
      }
    }
    if (train_rows.empty()) {
      throw ValidationError("district " + dd.train.district + " has a single regulatory year; cross-validation needs two");
    }
    TrainingSet sub{dd.train.district, dd.train.frame.subset(train_rows), {}};
    for (auto i : train_rows) sub.dates.push_back(dd.train.dates[i]);
    const ModelBundle bundle = fit_bundle(sub, config, band_for(bands, dd.train.district));

    audit[t] = {dd.train.district, fold.label, {eval_years.begin(), eval_years.end()},
                {train_years.begin(), train_years.end()}};
    auto& out = outputs[t];
    for (auto i : eval_rows) {
      const Date& date = dd.train.dates[i];
      out.push_back(forecast_single(bundle, dd.train.district, date, dd.train.frame.row(i), "reanalysis", 0));
      const auto it = nwp.find({dd.train.district, std::chrono::sys_days(date)});
      if (it == nwp.end()) continue;
      for (const auto& [lead, rows] : it->second) {
        for (ForecastMode mode : options.modes) {
          const bool any = std::any_of(rows.begin(), rows.end(), [&](const WeatherRow& r) {
            const int id = member_id(r.source);
            return mode == ForecastMode::EpsHres || (mode == ForecastMode::Hres) == (id == 0);
          });
          if (!any && !options.strict) continue;
          out.push_back(forecast(bundle, rows, mode, options.strict));
        }
      }
    }
  });

  CvResult result;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (auto& f : outputs[t]) result.forecasts.push_back(std::move(f));
    result.audit.push_back(std::move(audit[t]));
  }
  return result;
}

}  // namespace xflex::pipeline
