#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "xflex/errors.hpp"
#include "xflex/pipeline/bundle.hpp"
#include "xflex/pipeline/demo.hpp"
#include "xflex/pipeline/evaluate.hpp"
#include "xflex/pipeline/folds.hpp"
#include "xflex/pipeline/forecast.hpp"
#include "xflex/pipeline/io.hpp"

using namespace xflex;
using namespace xflex::pipeline;
using namespace std::chrono;

namespace {

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "xflex_pipeline_tests";
  std::filesystem::create_directories(p);
  return p;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto p = temp_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

struct Fixture {
  DemoData demo;
  ModelBundle bundle;
  std::string district;

  static const Fixture& get() {
    static const Fixture f = make();
    return f;
  }

 private:
  static Fixture make() {
    DemoOptions o;
    o.districts = 1;
    o.start = year{2021} / April / 1;
    o.end = year{2024} / March / 31;
    o.nwp_from = year{2024} / February / 1;
    o.leads = {0, 96};
    o.members = 4;
    DemoData d = make_demo(o);
    const std::string name = d.faults.front().district;
    const auto train = join_training(d.faults, d.weather, name, d.config.covariates());
    ModelBundle b = fit_bundle(train, d.config, band_for(d.bands, name));
    return Fixture{std::move(d), std::move(b), name};
  }
};

std::vector<WeatherRow> rows_for(const Fixture& f, const Date& date, int lead) {
  std::vector<WeatherRow> out;
  for (const auto& r : f.demo.weather) {
    if (r.district == f.district && r.date == date && r.lead_hours == lead && r.source != "reanalysis") {
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("dates and sources") {
  CHECK(format_date(parse_date("2020-02-29")) == "2020-02-29");
  CHECK_THROWS_AS(parse_date("2021-02-29"), ValidationError);
  CHECK_THROWS_AS(parse_date("2021-2-01"), ValidationError);
  CHECK_THROWS_AS(parse_date("20210201"), ValidationError);
  CHECK(member_id("hres") == 0);
  CHECK(member_id("m07") == 7);
  CHECK(member_id("m50") == 50);
  CHECK(member_id("reanalysis") == -1);
  CHECK_FALSE(is_valid_source("m51"));
  CHECK_FALSE(is_valid_source("m00"));
  CHECK_FALSE(is_valid_source("ens"));
}

TEST_CASE("regulatory folds") {
  std::vector<Date> dates;
  for (sys_days d = sys_days{year{2010} / April / 1}; d <= sys_days{year{2024} / March / 31}; d += days{1}) {
    dates.emplace_back(d);
  }
  const auto plan = make_folds(dates);
  REQUIRE(plan.folds.size() == 14);
  CHECK(plan.folds.front().label == "2010/11");
  CHECK(plan.folds.back().label == "2023/24");
  CHECK(plan.folds[3].first == year{2013} / April / 1);
  CHECK(plan.folds[3].last == year{2014} / March / 31);
  CHECK(regulatory_year(year{2011} / March / 31) == 2010);
  CHECK(regulatory_year(year{2011} / April / 1) == 2011);
  CHECK(*plan.fold_of(year{2015} / January / 10) == 4);
  CHECK_FALSE(plan.fold_of(year{2030} / January / 1).has_value());

  const auto cut = make_folds({year{2010} / June / 15, year{2012} / May / 2});
  REQUIRE(cut.folds.size() == 3);
  CHECK(cut.folds.front().first == year{2010} / June / 15);
  CHECK(cut.folds.back().last == year{2012} / May / 2);
  CHECK_THROWS_AS(make_folds({}), ValidationError);
}

TEST_CASE("loaders reject malformed input") {
  CHECK_THROWS_AS(load_faults(write_file("f1.csv", "district,date,count\nA,2020-01-01,3\nA,2020-01-01,4\n")),
                  ValidationError);
  CHECK_THROWS_AS(load_faults(write_file("f2.csv", "district,date,count\nA,2020-01-01,-1\n")), ValidationError);
  CHECK_THROWS_AS(load_faults(write_file("f3.csv", "district,day,count\nA,2020-01-01,1\n")), ValidationError);
  CHECK_THROWS_AS(load_faults((temp_dir() / "absent.csv").string()), ValidationError);
  const auto ok = load_faults(write_file("f4.csv", "district,date,count\nB,2020-01-02,0\nA,2020-01-01,3\n"));
  CHECK(ok.size() == 2);
  CHECK(districts(ok) == std::vector<std::string>{"A", "B"});

  const std::string head = "district,date,source,lead_h,ws\n";
  CHECK_THROWS_AS(load_weather(write_file("w1.csv", head + "A,2020-01-01,m51,0,3\n")), ValidationError);
  CHECK_THROWS_AS(load_weather(write_file("w2.csv", head + "A,2020-01-01,hres,0,3\nA,2020-01-01,hres,0,4\n")),
                  ValidationError);
  const auto w = load_weather(write_file("w3.csv", head + "A,2020-01-01,reanalysis,0,3.5\n"));
  REQUIRE(w.size() == 1);
  CHECK(w[0].covariates.at("ws") == 3.5);

  // A joined row missing a requested covariate is named in the error.
  CHECK_THROWS_WITH_AS(join_training(ok, w, "A", {"tp"}), doctest::Contains("2020-01-01"), ValidationError);
}

TEST_CASE("bundle persistence is bit-exact") {
  const auto& f = Fixture::get();
  const auto path = (temp_dir() / "bundle.json").string();
  save_bundle(f.bundle, path);
  const ModelBundle back = load_bundle(path);
  CHECK(back.to_json().dump() == f.bundle.to_json().dump());
  CHECK(back.alpha_T() == f.bundle.alpha_T());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ws(2.0, 30.0), tp(0.0, 8.0);
  for (int i = 0; i < 200; ++i) {
    const CovariateMap x{{"ws10_max", ws(rng)}, {"tp_q90", tp(rng)}};
    const auto a = f.bundle.predict(x), b = back.predict(x);
    for (std::int64_t y = 0; y < 300; y += 7) CHECK(a.cdf(y) == b.cdf(y));
  }
  auto j = f.bundle.to_json();
  j.erase("schema_version");
  CHECK_THROWS_AS(ModelBundle::from_json(j), ValidationError);
  j = f.bundle.to_json();
  j["schema_version"] = kBundleSchemaVersion + 1;
  CHECK_THROWS_AS(ModelBundle::from_json(j), ValidationError);
}

TEST_CASE("forecast modes and member handling") {
  const auto& f = Fixture::get();
  const Date date = year{2024} / March / 3;
  const auto rows = rows_for(f, date, 0);
  REQUIRE(rows.size() == 5);

  const auto both = forecast(f.bundle, rows, ForecastMode::EpsHres);
  const auto eps = forecast(f.bundle, rows, ForecastMode::Eps);
  const auto hres = forecast(f.bundle, rows, ForecastMode::Hres);
  CHECK(both.members == 5);
  CHECK(eps.members == 4);
  CHECK(hres.members == 1);
  CHECK(both.source == "eps+hres");
  CHECK(parse_mode(mode_name(ForecastMode::Eps)) == ForecastMode::Eps);
  CHECK_THROWS_AS(parse_mode("ens"), ValidationError);

  // The HRES-only forecast is the bundle's own prediction.
  const auto hres_row = std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.source == "hres"; });
  const auto direct = f.bundle.predict(hres_row->covariates);
  for (std::int64_t y = 0; y < 200; ++y) CHECK(hres.flex->cdf(y) == direct.cdf(y));

  auto shuffled = rows;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto again = forecast(f.bundle, shuffled, ForecastMode::EpsHres);
  for (std::int64_t y = 0; y < 200; ++y) CHECK(again.flex->cdf(y) == both.flex->cdf(y));

  CHECK_THROWS_AS(forecast(f.bundle, rows, ForecastMode::EpsHres, true), ValidationError);
  CHECK_THROWS_AS(forecast(f.bundle, {}, ForecastMode::EpsHres), ValidationError);
  auto mixed = rows;
  mixed.back().lead_hours = 96;
  CHECK_THROWS_AS(forecast(f.bundle, mixed, ForecastMode::EpsHres), ValidationError);
}

TEST_CASE("beyond the taper HRES is an ordinary member") {
  const auto& f = Fixture::get();
  auto rows = rows_for(f, year{2024} / March / 10, 96);
  REQUIRE(rows.size() == 5);
  auto swapped = rows;
  auto h = std::find_if(swapped.begin(), swapped.end(), [](const auto& r) { return r.source == "hres"; });
  auto m = std::find_if(swapped.begin(), swapped.end(), [](const auto& r) { return r.source == "m01"; });
  std::swap(h->covariates, m->covariates);
  const auto a = forecast(f.bundle, rows, ForecastMode::EpsHres);
  const auto b = forecast(f.bundle, swapped, ForecastMode::EpsHres);
  for (std::int64_t y = 0; y < 300; ++y) CHECK(a.flex->cdf(y) == b.flex->cdf(y));
}

TEST_CASE("records round trip") {
  const auto& f = Fixture::get();
  const auto out = forecast(f.bundle, rows_for(f, year{2024} / March / 5, 0), ForecastMode::EpsHres);
  const auto rec = forecast_record(out);
  CHECK(rec.at("district") == f.district);
  CHECK(rec.at("date") == "2024-03-05");
  const auto back = output_from_record(rec);
  CHECK(forecast_record(back).dump() == rec.dump());
  const auto path = (temp_dir() / "records.jsonl").string();
  write_records({out, out}, path);
  const auto read = read_records(path);
  REQUIRE(read.size() == 2);
  CHECK(forecast_record(read[1]).dump() == rec.dump());

  const TabulatedDistribution t({0.2, 0.5, 1.0});
  CHECK(t.cdf(-1) == 0.0);
  CHECK(t.cdf(7) == 1.0);
  CHECK(t.quantile(0.2) == 0);
  CHECK(t.quantile(0.21) == 1);
  CHECK(t.quantile(0.9) == 2);
}

TEST_CASE("evaluation alignment and baseline scaling") {
  const auto& f = Fixture::get();
  std::vector<ForecastOutput> fc;
  for (int day = 1; day <= 20; ++day) {
    const Date date = year{2024} / March / day;
    for (int lead : {0, 96}) fc.push_back(forecast(f.bundle, rows_for(f, date, lead), ForecastMode::EpsHres));
  }
  EvaluateOptions opt;
  opt.twcrps_samples = 2000;
  const auto report = evaluate(fc, f.demo.faults, f.demo.bands, opt);
  CHECK(report.cases == fc.size());
  for (const auto& row : report.scaled.rows) {
    if (row.lead_hours == 0 && row.source == "eps+hres" && row.flag.empty()) CHECK(row.value == 1.0);
  }
  CHECK(std::isfinite(report.score(f.district, 96, "eps+hres", "pinball_0.5")));
  CHECK(std::isnan(report.score(f.district, 96, "eps+hres", "no_such_metric")));
  CHECK(evaluate(fc, f.demo.faults, f.demo.bands, opt).to_json().dump() == report.to_json().dump());

  std::vector<FaultRow> missing;
  for (const auto& r : f.demo.faults) {
    if (r.date != year{2024} / March / 7) missing.push_back(r);
  }
  CHECK_THROWS_AS(evaluate(fc, missing, f.demo.bands, opt), ValidationError);
  auto dup = fc;
  dup.push_back(fc.front());
  CHECK_THROWS_AS(evaluate(dup, f.demo.faults, f.demo.bands, opt), ValidationError);
}
