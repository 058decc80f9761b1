// Command-line front end: simulations, fitting, forecasting and evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xflex/errors.hpp"
#include "xflex/parallel.hpp"
#include "xflex/pipeline/demo.hpp"
#include "xflex/pipeline/evaluate.hpp"
#include "xflex/pipeline/folds.hpp"
#include "xflex/pipeline/selection.hpp"
#include "xflex/simlab.hpp"

namespace fs = std::filesystem;
using namespace xflex;
using namespace xflex::pipeline;

namespace {

std::vector<int> parse_leads(const std::string& text) {
  std::vector<int> leads;
  if (text.empty()) return leads;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      leads.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("bad lead time '" + item + "' in --lead-hours");
    }
  }
  return leads;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write " + p.string());
  out << std::setprecision(10);
  return out;
}

struct Common {
  std::string out = "out";
  std::uint64_t seed = 1;
};

struct SimArgs {
  int scenario = 1;
  double xi = 0.0;
  std::size_t reps = 100;
  std::size_t n = 5000;
  std::string covariates;
};

sim::ScenarioConfig scenario_from(const SimArgs& a, std::uint64_t seed) {
  sim::ScenarioConfig c = sim::ScenarioConfig::preset(a.scenario, a.xi);
  c.n_reps = a.reps;
  c.n_per_rep = a.n;
  c.seed = seed;
  if (!a.covariates.empty()) c.covariate_path = a.covariates;
  c.validate();
  return c;
}

void run_simulate(const Common& common, const SimArgs& a) {
  const auto cfg = scenario_from(a, common.seed);
  const auto r = sim::run_scenario(cfg);
  fs::create_directories(common.out);
  const std::string stem = "scenario" + std::to_string(a.scenario) + "_xi" + std::to_string(a.xi).substr(0, 3);
  nlohmann::json j;
  j["scenario"] = a.scenario;
  j["xi"] = a.xi;
  j["reps"] = a.reps;
  j["n_per_rep"] = a.n;
  j["seed"] = common.seed;
  j["failures"] = r.failures;
  auto csv = open_out(fs::path(common.out) / (stem + ".csv"));
  csv << "level,mean_true_quantile,flex_rmse_mean,flex_rmse_sd,bulk_only_rmse_mean,bulk_only_rmse_sd,flex_wins\n";
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "level     qbar      flex (sd)          bulk-only (sd)     flex wins\n";
  for (std::size_t l = 0; l < r.levels.size(); ++l) {
    std::size_t wins = 0;
    for (std::size_t k = 0; k < r.flex.size(); ++k) wins += r.flex[k][l] < r.bulk_only[k][l];
    const double fm = r.mean(r.flex, l), fs_ = r.sd(r.flex, l);
    const double bm = r.mean(r.bulk_only, l), bs = r.sd(r.bulk_only, l);
    csv << r.levels[l] << ',' << r.mean_true_quantile[l] << ',' << fm << ',' << fs_ << ',' << bm << ',' << bs
        << ',' << wins << '\n';
    j["levels"].push_back({{"level", r.levels[l]},
                           {"mean_true_quantile", r.mean_true_quantile[l]},
                           {"flex", {{"mean", fm}, {"sd", fs_}}},
                           {"bulk_only", {{"mean", bm}, {"sd", bs}}},
                           {"flex_wins", wins}});
    std::cout << std::setw(7) << r.levels[l] << std::setw(9) << r.mean_true_quantile[l] << std::setw(9) << fm
              << " (" << fs_ << ")" << std::setw(9) << bm << " (" << bs << ")" << std::setw(8) << wins << '/'
              << r.flex.size() << '\n';
  }
  open_out(fs::path(common.out) / (stem + ".json")) << j.dump(2) << '\n';
  if (!r.failures.empty()) std::cerr << r.failures.size() << " replications failed\n";
}

void run_scan(const Common& common, const SimArgs& a) {
  auto scan_cfg = sim::ScanConfig::around(scenario_from(a, common.seed));
  const auto r = sim::threshold_scan(scan_cfg);
  const double mid = 1.0 - scan_cfg.base.phi;
  const auto trend = sim::xi_dispersion_trend(r, mid);
  fs::create_directories(common.out);
  auto csv = open_out(fs::path(common.out) / "threshold_scan.csv");
  csv << "alpha_T,level,scaled_rmse\n";
  nlohmann::json j;
  j["scenario"] = a.scenario;
  j["xi"] = a.xi;
  j["reps"] = a.reps;
  j["xi_dispersion_trend"] = {{"from_alpha", mid}, {"spearman_rho", trend.rho}, {"p_one_sided", trend.p_one_sided}};
  auto cells = open_out(fs::path(common.out) / "threshold_scan_params.csv");
  cells << "alpha_T,xi_mean,xi_sd,log_sigma_mean,log_sigma_sd,failures\n";
  for (const auto& c : r.cells) {
    for (std::size_t l = 0; l < r.eval_levels.size(); ++l) {
      csv << c.alpha_T << ',' << r.eval_levels[l] << ',' << c.scaled_rmse[l] << '\n';
    }
    cells << c.alpha_T << ',' << c.xi_mean << ',' << c.xi_sd << ',' << c.log_sigma_mean << ','
          << c.log_sigma_sd << ',' << c.failures.size() << '\n';
    j["cells"].push_back({{"alpha_T", c.alpha_T},
                          {"scaled_rmse", c.scaled_rmse},
                          {"xi_mean", c.xi_mean},
                          {"xi_sd", c.xi_sd},
                          {"log_sigma_mean", c.log_sigma_mean},
                          {"log_sigma_sd", c.log_sigma_sd},
                          {"failures", c.failures}});
    std::cout << "alpha_T " << c.alpha_T << "  xi " << c.xi_mean << " (sd " << c.xi_sd << ")  scaled RMSE "
              << c.scaled_rmse.back() << '\n';
  }
  j["eval_levels"] = r.eval_levels;
  open_out(fs::path(common.out) / "threshold_scan.json") << j.dump(2) << '\n';
  std::cout << "sd(xi) trend above " << mid << ": rho " << trend.rho << ", p " << trend.p_one_sided << '\n';
}

struct DataArgs {
  std::string faults, weather, bands, config;
};

struct Loaded {
  std::vector<FaultRow> faults;
  std::vector<WeatherRow> weather;
  std::map<std::string, BandSpec> bands;
  PipelineConfig config;
};

Loaded load_all(const DataArgs& a) {
  return {load_faults(a.faults), load_weather(a.weather), load_bands(a.bands), load_config(a.config)};
}

fs::path bundle_path(const std::string& dir, const std::string& district) {
  return fs::path(dir) / ("bundle_" + district + ".json");
}

void run_fit(const Common& common, const DataArgs& a, bool select) {
  const Loaded d = load_all(a);
  const auto names = districts(d.faults);
  const fs::path dir = fs::path(common.out) / "bundles";
  fs::create_directories(dir);
  std::vector<std::optional<ModelBundle>> bundles(names.size());
  std::vector<nlohmann::json> ledgers(names.size());
  std::vector<std::string> chosen(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    const TrainingSet t = join_training(d.faults, d.weather, names[i], d.config.covariates());
    const BandSpec& spec = band_for(d.bands, names[i]);
    if (!select) {
      bundles[i] = fit_bundle(t, d.config, spec);
      return;
    }
    const auto result = select_model(t, make_folds(t.dates), d.config, spec, candidates_from(d.config));
    ledgers[i] = result.to_json();
    chosen[i] = result.winner().label();
    bundles[i] = fit_bundle(t, d.config, spec, result.winner().alpha_T, result.winner().tail, ledgers[i]);
  });
  for (std::size_t i = 0; i < names.size(); ++i) {
    save_bundle(*bundles[i], bundle_path(dir.string(), names[i]).string());
    if (select) {
      open_out(fs::path(common.out) / ("selection_" + names[i] + ".json")) << ledgers[i].dump(2) << '\n';
      std::cout << names[i] << ": selected " << chosen[i] << '\n';
    } else {
      std::cout << names[i] << ": alpha_T " << bundles[i]->alpha_T() << ", sigma_hat "
                << bundles[i]->bulk().sigma_hat() << '\n';
    }
  }
}

void run_forecast(const Common& common, const std::string& bundle_dir, const std::string& weather_path,
                  const std::string& mode_text, const std::string& leads_text, bool strict) {
  const auto mode = parse_mode(mode_text);
  const auto leads = parse_leads(leads_text);
  const auto weather = load_weather(weather_path);
  std::map<std::string, ModelBundle> bundles;
  std::vector<std::pair<WeatherKey, std::vector<WeatherRow>>> groups;
  for (auto& [key, rows] : group_nwp(weather)) {
    const int lead = std::get<2>(key);
    if (!leads.empty() && std::find(leads.begin(), leads.end(), lead) == leads.end()) continue;
    const std::string& district = std::get<0>(key);
    if (!bundles.count(district)) {
      const auto p = bundle_path(bundle_dir, district);
      if (!fs::exists(p)) throw ValidationError("no bundle for district '" + district + "' in " + bundle_dir);
      bundles.emplace(district, load_bundle(p.string()));
    }
    groups.emplace_back(key, std::move(rows));
  }
  std::vector<std::optional<ForecastOutput>> out(groups.size());
  parallel_for(groups.size(), [&](std::size_t i) {
    const auto& rows = groups[i].second;
    const bool has = std::any_of(rows.begin(), rows.end(), [&](const WeatherRow& r) {
      const int id = member_id(r.source);
      return mode == ForecastMode::EpsHres || (mode == ForecastMode::Hres) == (id == 0);
    });
    if (!has && !strict) return;
    out[i] = forecast(bundles.at(std::get<0>(groups[i].first)), rows, mode, strict);
  });
  std::vector<ForecastOutput> forecasts;
  for (auto& f : out) {
    if (f) forecasts.push_back(std::move(*f));
  }
  fs::create_directories(common.out);
  const auto path = fs::path(common.out) / "forecasts.jsonl";
  write_records(forecasts, path.string());
  std::cout << forecasts.size() << " forecasts written to " << path.string() << '\n';
}

struct EvalArgs {
  std::string baseline_source = "eps+hres";
  int baseline_lead = 0;
  std::size_t twcrps_samples = 100000;
};

void report_summary(const EvaluationReport& r, const std::string& dir) {
  std::cout << r.cases << " cases evaluated, " << r.twcrps_degenerate << " degenerate twCRPS cases excluded\n";
  std::cout << "coverage of the flex quantiles, all cases:\n";
  for (const auto& e : r.reliability) {
    if (e.model != "flex" || e.table.rows.empty() || e.table.rows.front().condition != "all") continue;
    std::cout << "  " << e.source << " lead " << e.lead_hours;
    for (const auto& row : e.table.rows) {
      std::cout << "  " << row.level << ":" << std::setprecision(3) << row.coverage;
    }
    std::cout << '\n';
  }
  std::cout << "report written to " << dir << '\n';
}

EvaluateOptions eval_options(const EvalArgs& e, std::uint64_t seed) {
  EvaluateOptions o;
  o.baseline_source = e.baseline_source;
  o.baseline_lead = e.baseline_lead;
  o.twcrps_samples = e.twcrps_samples;
  o.seed = seed;
  return o;
}

void run_evaluate(const Common& common, const std::string& forecasts, const std::string& faults,
                  const std::string& bands, const EvalArgs& e) {
  const auto report =
      evaluate(read_records(forecasts), load_faults(faults), load_bands(bands), eval_options(e, common.seed));
  write_report(report, common.out);
  report_summary(report, common.out);
}

void run_cv_cmd(const Common& common, const DataArgs& a, const std::string& modes_text,
                const std::string& leads_text, bool strict, const EvalArgs& e) {
  const Loaded d = load_all(a);
  CvOptions o;
  o.modes.clear();
  std::stringstream ss(modes_text);
  std::string item;
  while (std::getline(ss, item, ',')) o.modes.push_back(parse_mode(item));
  o.leads = parse_leads(leads_text);
  o.strict = strict;
  const auto cv = run_cv(d.faults, d.weather, d.bands, d.config, o);
  fs::create_directories(common.out);
  write_records(cv.forecasts, (fs::path(common.out) / "hindcasts.jsonl").string());
  nlohmann::json audit = nlohmann::json::array();
  for (const auto& r : cv.audit) {
    audit.push_back({{"district", r.district},
                     {"fold", r.fold},
                     {"evaluated_years", r.evaluated_years},
                     {"training_years", r.training_years},
                     {"leaked", r.leaked()}});
  }
  open_out(fs::path(common.out) / "leakage_audit.json") << audit.dump(2) << '\n';
  if (!cv.leakage_free()) throw std::logic_error("leakage audit failed");
  const auto report = evaluate(cv.forecasts, d.faults, d.bands, eval_options(e, common.seed));
  write_report(report, common.out);
  std::cout << cv.audit.size() << " folds, leakage audit clean\n";
  report_summary(report, common.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic count forecasting with spliced extreme tails"};
  app.require_subcommand(1);
  Common common;
  SimArgs sim_args;
  DataArgs data;
  EvalArgs eval;
  std::string mode = "eps+hres", leads, bundle_dir, forecasts_path;
  bool strict = false;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--out", common.out, "Output directory")->capture_default_str();
    c->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  };
  auto add_sim = [&](CLI::App* c) {
    add_common(c);
    c->add_option("--scenario", sim_args.scenario, "Scenario 1, 2 or 3")->check(CLI::IsMember({1, 2, 3}))
        ->capture_default_str();
    c->add_option("--xi", sim_args.xi, "Tail shape (0 or 0.3 in the reference setup)")->capture_default_str();
    c->add_option("--reps", sim_args.reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--n", sim_args.n, "Rows per replication")->capture_default_str();
    c->add_option("--covariates", sim_args.covariates, "CSV with columns z1,z2 (default: synthetic)");
  };
  auto add_data = [&](CLI::App* c, bool need_config) {
    add_common(c);
    c->add_option("--faults", data.faults, "Fault counts CSV")->required();
    c->add_option("--weather", data.weather, "Weather covariates CSV")->required();
    c->add_option("--bands", data.bands, "Band spec JSON")->required();
    auto* cfg = c->add_option("--config", data.config, "Pipeline config JSON");
    if (need_config) cfg->required();
  };
  auto add_eval = [&](CLI::App* c) {
    c->add_option("--baseline-source", eval.baseline_source, "Source of the scaled-pinball baseline")
        ->capture_default_str();
    c->add_option("--baseline-lead", eval.baseline_lead, "Lead of the scaled-pinball baseline")
        ->capture_default_str();
    c->add_option("--twcrps-samples", eval.twcrps_samples, "Samples per twCRPS estimate (0 disables)")
        ->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "Flex vs bulk-only RMSE on a simulation scenario");
  add_sim(simulate);
  auto* scan = app.add_subcommand("threshold-scan", "Sensitivity of the fit to the transition level");
  add_sim(scan);
  auto* fit = app.add_subcommand("fit", "Fit one model bundle per district");
  add_data(fit, true);
  auto* select = app.add_subcommand("select", "Cross-validated choice of transition level and tail covariates");
  add_data(select, true);
  auto* fc = app.add_subcommand("forecast", "Forecasts from NWP ensemble rows");
  add_common(fc);
  fc->add_option("--bundle-dir", bundle_dir, "Directory holding bundle_<district>.json")->required();
  fc->add_option("--weather", data.weather, "Weather covariates CSV")->required();
  fc->add_option("--mode", mode, "eps+hres, eps or hres")->capture_default_str();
  fc->add_option("--lead-hours", leads, "Comma-separated lead times (default: all)");
  fc->add_flag("--strict", strict, "Require every member of the mode");
  auto* ev = app.add_subcommand("evaluate", "Score forecast records against observed counts");
  add_common(ev);
  ev->add_option("--forecasts", forecasts_path, "Forecast records (JSON lines)")->required();
  ev->add_option("--faults", data.faults, "Fault counts CSV")->required();
  ev->add_option("--bands", data.bands, "Band spec JSON")->required();
  add_eval(ev);
  auto* cv = app.add_subcommand("cv", "Leave-one-regulatory-year-out hindcasts and their scores");
  add_data(cv, true);
  cv->add_option("--mode", mode, "Comma-separated forecast modes")->capture_default_str();
  cv->add_option("--lead-hours", leads, "Comma-separated lead times (default: all)");
  cv->add_flag("--strict", strict, "Require every member of each mode");
  add_eval(cv);
  DemoOptions demo_opts;
  std::size_t demo_districts = demo_opts.districts, demo_members = demo_opts.members;
  std::string demo_leads = "0,24,72,120";
  auto* demo = app.add_subcommand("demo-data", "Write a synthetic data set for trying the pipeline");
  add_common(demo);
  demo->add_option("--districts", demo_districts, "Number of districts")->capture_default_str();
  demo->add_option("--members", demo_members, "EPS members besides HRES")->capture_default_str();
  demo->add_option("--lead-hours", demo_leads, "Comma-separated NWP lead times")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      run_simulate(common, sim_args);
    } else if (*scan) {
      run_scan(common, sim_args);
    } else if (*fit) {
      run_fit(common, data, false);
    } else if (*select) {
      run_fit(common, data, true);
    } else if (*fc) {
      run_forecast(common, bundle_dir, data.weather, mode, leads, strict);
    } else if (*ev) {
      run_evaluate(common, forecasts_path, data.faults, data.bands, eval);
    } else if (*cv) {
      run_cv_cmd(common, data, mode, leads, strict, eval);
    } else if (*demo) {
      demo_opts.districts = demo_districts;
      demo_opts.members = demo_members;
      demo_opts.leads = parse_leads(demo_leads);
      demo_opts.seed = common.seed;
      write_demo(make_demo(demo_opts), common.out);
      std::cout << "demo data written to " << common.out << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
