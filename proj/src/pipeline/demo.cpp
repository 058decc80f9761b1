#include "xflex/pipeline/demo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>

#include "xflex/errors.hpp"
#include "xflex/simlab.hpp"

namespace xflex::pipeline {

namespace {

constexpr double kKappa = 4.0;
constexpr double kPhi = 0.1;
constexpr double kXi = 0.1;

double day_of_year(const Date& d) {
  using namespace std::chrono;
  const sys_days jan1 = d.year() / January / 1;
  return static_cast<double>((sys_days(d) - jan1).count());
}

int choose_quantile_count(const std::vector<std::int64_t>& counts, double p) {
  std::vector<std::int64_t> v = counts;
  std::sort(v.begin(), v.end());
  const auto i = static_cast<std::size_t>(std::floor(p * static_cast<double>(v.size() - 1)));
  return static_cast<int>(v[i]);
}

}  // namespace

DemoData make_demo(const DemoOptions& o) {
  using namespace std::chrono;
  if (o.districts == 0) throw ValidationError("demo needs at least one district");
  if (!o.start.ok() || !o.end.ok() || sys_days(o.end) < sys_days(o.start)) {
    throw ValidationError("demo date range is empty");
  }
  if (o.members > 50) throw ValidationError("at most 50 EPS members");
  for (int lead : o.leads) {
    if (lead < 0) throw ValidationError("lead times must be nonnegative");
  }
  const Date nwp_from = o.nwp_from.value_or(Date(sys_days(o.end) - days(730) + days(1)));

  DemoData demo;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (std::size_t d = 0; d < o.districts; ++d) {
    const std::string name = "D" + std::to_string(d + 1);
    const double base = std::log(7.0) + 0.1 * static_cast<double>(d);
    std::vector<std::int64_t> counts;
    double ar = 0.0;
    for (sys_days day = sys_days(o.start); day <= sys_days(o.end); day += days(1)) {
      const Date date(day);
      const double season = std::cos(2.0 * std::numbers::pi * day_of_year(date) / 365.25);
      ar = 0.6 * ar + 0.8 * normal(rng);
      const double e2 = normal(rng);
      const double ws = std::exp(std::log(9.0 + 2.5 * season) + 0.3 * ar);
      const double tp = std::max(0.0, 2.0 * std::exp(0.5 * (0.6 * ar + 0.8 * e2)) - 0.5);

      const dist::DiscreteGammaParams bulk{kKappa, std::exp(base + 0.09 * (ws - 9.0) + 0.08 * (tp - 2.0))};
      const dist::GpParams tail{std::exp(std::log(6.0) + 0.06 * (ws - 9.0)), kXi};
      const sim::DgDgp law(bulk, tail, kPhi);
      double u = unif(rng);
      if (u >= 1.0) u = std::nextafter(1.0, 0.0);
      const std::int64_t y = law.quantile(u);
      counts.push_back(y);
      demo.faults.push_back({name, date, y});
      demo.weather.push_back({name, date, "reanalysis", 0, {{"ws10_max", ws}, {"tp_q90", tp}}});

      if (day < sys_days(nwp_from)) continue;
      for (int lead : o.leads) {
        const double spread = static_cast<double>(lead) / 120.0;
        for (std::size_t m = 0; m <= o.members; ++m) {
          const std::string source = m == 0 ? "hres" : (m < 10 ? "m0" : "m") + std::to_string(m);
          // HRES carries half the EPS member error.
          const double scale = m == 0 ? 0.5 * spread : spread;
          const double mws = std::max(0.0, ws + 1.5 * scale * normal(rng));
          const double mtp = std::max(0.0, tp * std::exp(0.4 * scale * normal(rng)));
          demo.weather.push_back({name, date, source, lead, {{"ws10_max", mws}, {"tp_q90", mtp}}});
        }
      }
    }
    BandSpec spec;
    spec.district = name;
    spec.tau_AG = choose_quantile_count(counts, 0.8);
    spec.tau_RA = std::max(spec.tau_AG + 1, choose_quantile_count(counts, 0.98));
    spec.validate();
    demo.bands[name] = spec;
  }

  PipelineConfig& c = demo.config;
  c.bulk.smooths = {SplineSpec{"ws10_max", 8, 3, 2}, SplineSpec{"tp_q90", 8, 3, 2}};
  c.tail.linear = {"ws10_max"};
  c.alpha_T = 0.9;
  c.candidate_alphas = {0.8, 0.9, 0.95};
  c.candidate_tails = {Formula{}, c.tail};
  c.wind_covariate = "ws10_max";
  return demo;
}

void write_demo(const DemoData& demo, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream out(base / "faults.csv");
    if (!out) throw ValidationError("cannot write " + (base / "faults.csv").string());
    out << "district,date,count\n";
    for (const auto& f : demo.faults) out << f.district << ',' << format_date(f.date) << ',' << f.count << '\n';
  }
  {
    std::ofstream out(base / "weather.csv");
    out << std::setprecision(8) << "district,date,source,lead_h,ws10_max,tp_q90\n";
    for (const auto& w : demo.weather) {
      out << w.district << ',' << format_date(w.date) << ',' << w.source << ',' << w.lead_hours << ','
          << w.covariates.at("ws10_max") << ',' << w.covariates.at("tp_q90") << '\n';
    }
  }
  {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& [name, b] : demo.bands) {
      bands.push_back({{"district", name}, {"tau_AG", b.tau_AG}, {"tau_RA", b.tau_RA},
                       {"resolution_hours", b.resolution_hours}});
    }
    std::ofstream(base / "bands.json") << bands.dump(2) << '\n';
  }
  std::ofstream(base / "config.json") << demo.config.to_json().dump(2) << '\n';
}

}  // namespace xflex::pipeline
