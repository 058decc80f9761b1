#include "xflex/pipeline/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "xflex/errors.hpp"

namespace xflex::pipeline {

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// Type-7 quantile.
double empirical_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<std::string> PipelineConfig::covariates() const {
  std::set<std::string> names;
  for (const auto& c : bulk.covariates()) names.insert(c);
  for (const auto& c : tail.covariates()) names.insert(c);
  for (const auto& f : candidate_tails) {
    for (const auto& c : f.covariates()) names.insert(c);
  }
  names.insert(wind_covariate);
  return {names.begin(), names.end()};
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json tails = nlohmann::json::array();
  for (const auto& f : candidate_tails) tails.push_back(formula_to_json(f));
  nlohmann::json smoothing;
  if (quantile.smoothing.cross_validate) {
    smoothing = "cv";
  } else {
    smoothing = quantile.smoothing.weights;
  }
  return {{"bulk", formula_to_json(bulk)},
          {"tail", formula_to_json(tail)},
          {"alpha_T", alpha_T},
          {"candidates", {{"alpha_T", candidate_alphas}, {"tail", tails}}},
          {"lambda", quantile.lambda},
          {"select_lambda", quantile.select_lambda},
          {"smoothing", smoothing},
          {"tail_smoothing_weight", tail_smoothing_weight},
          {"wind_covariate", wind_covariate}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  try {
    PipelineConfig c;
    c.bulk = formula_from_json(j.at("bulk"));
    if (j.contains("tail")) c.tail = formula_from_json(j.at("tail"));
    c.alpha_T = j.value("alpha_T", c.alpha_T);
    if (j.contains("candidates")) {
      const auto& cand = j.at("candidates");
      if (cand.contains("alpha_T")) c.candidate_alphas = cand.at("alpha_T").get<std::vector<double>>();
      if (cand.contains("tail")) {
        for (const auto& f : cand.at("tail")) c.candidate_tails.push_back(formula_from_json(f));
      }
    }
    c.quantile.lambda = j.value("lambda", c.quantile.lambda);
    c.quantile.select_lambda = j.value("select_lambda", false);
    if (j.contains("smoothing")) {
      const auto& s = j.at("smoothing");
      if (s.is_string()) {
        if (s.get<std::string>() != "cv") throw ValidationError("smoothing must be \"cv\" or a weight list");
        c.quantile.smoothing.cross_validate = true;
      } else {
        c.quantile.smoothing.weights = s.get<std::vector<double>>();
      }
    }
    c.tail_smoothing_weight = j.value("tail_smoothing_weight", c.tail_smoothing_weight);
    c.wind_covariate = j.value("wind_covariate", c.wind_covariate);
    if (!(c.alpha_T > 0.5 && c.alpha_T < 1.0)) throw ValidationError("alpha_T must lie in (0.5, 1)");
    for (double a : c.candidate_alphas) {
      if (!(a > 0.5 && a < 1.0)) throw ValidationError("candidate alpha_T must lie in (0.5, 1)");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const std::string& path) { return PipelineConfig::from_json(read_json(path)); }

std::map<std::string, BandSpec> load_bands(const std::string& path) {
  const nlohmann::json j = read_json(path);
  std::map<std::string, BandSpec> out;
  try {
    for (const auto& b : j) {
      BandSpec s;
      s.district = b.at("district").get<std::string>();
      s.tau_AG = b.at("tau_AG").get<int>();
      s.tau_RA = b.at("tau_RA").get<int>();
      s.resolution_hours = b.value("resolution_hours", 24);
      s.validate();
      if (!out.emplace(s.district, s).second) {
        throw ValidationError(path + ": duplicate band spec for '" + s.district + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return out;
}

const BandSpec& band_for(const std::map<std::string, BandSpec>& bands, const std::string& district) {
  const auto it = bands.find(district);
  if (it == bands.end()) throw ValidationError("no band spec for district '" + district + "'");
  return it->second;
}

QuantileGrid bundle_grid(double alpha_T) {
  if (!(alpha_T > 0.5 && alpha_T < 1.0)) throw ValidationError("alpha_T must lie in (0.5, 1)");
  return QuantileGrid({0.05, 0.25, 0.5, alpha_T});
}

ModelBundle::ModelBundle(std::string district, QuantileModelSet bulk, TailModel tail, BandSpec bands,
                         std::string wind_covariate, double wind_p80, nlohmann::json selection)
    : district_(std::move(district)), bulk_(std::move(bulk)), tail_(std::move(tail)),
      bands_(std::move(bands)), wind_covariate_(std::move(wind_covariate)), wind_p80_(wind_p80),
      selection_(std::move(selection)) {
  if (!bulk_.grid().index_of(tail_.alpha_T())) {
    throw ValidationError("bundle quantile grid does not contain its alpha_T");
  }
  bands_.validate();
}

std::vector<std::string> ModelBundle::covariates() const {
  std::set<std::string> names;
  for (const auto& c : bulk_.design().formula().covariates()) names.insert(c);
  for (const auto& c : tail_.tail_covariates()) names.insert(c);
  return {names.begin(), names.end()};
}

PredictiveDistribution ModelBundle::predict(const CovariateMap& x) const {
  return splice_cdf(predict_quantiles(bulk_, x), tail_.alpha_T(), tail_, x);
}

PredictiveDistribution ModelBundle::predict_bulk_only(const CovariateMap& x) const {
  return bulk_only_distribution(predict_quantiles(bulk_, x));
}

nlohmann::json ModelBundle::to_json() const {
  return {{"schema_version", kBundleSchemaVersion},
          {"district", district_},
          {"quantile_model", bulk_.to_json()},
          {"tail_model", tail_.to_json()},
          {"bands",
           {{"district", bands_.district},
            {"tau_AG", bands_.tau_AG},
            {"tau_RA", bands_.tau_RA},
            {"resolution_hours", bands_.resolution_hours}}},
          {"alpha_T", tail_.alpha_T()},
          {"levels", bulk_.grid().levels()},
          {"lambda", bulk_.lambda()},
          {"sigma_hat", bulk_.sigma_hat()},
          {"wind_covariate", wind_covariate_},
          {"wind_p80", wind_p80_},
          {"selection", selection_}};
}

ModelBundle ModelBundle::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw ValidationError("model bundle has no schema_version");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kBundleSchemaVersion) {
    throw ValidationError("model bundle schema_version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kBundleSchemaVersion) + ")");
  }
  try {
    BandSpec bands;
    const auto& b = j.at("bands");
    bands.district = b.at("district").get<std::string>();
    bands.tau_AG = b.at("tau_AG").get<int>();
    bands.tau_RA = b.at("tau_RA").get<int>();
    bands.resolution_hours = b.value("resolution_hours", 24);
    return ModelBundle(j.at("district").get<std::string>(),
                       QuantileModelSet::from_json(j.at("quantile_model")),
                       TailModel::from_json(j.at("tail_model")), bands,
                       j.at("wind_covariate").get<std::string>(), j.at("wind_p80").get<double>(),
                       j.value("selection", nlohmann::json()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model bundle: ") + e.what());
  }
}

ModelBundle fit_bundle(const TrainingSet& train, const PipelineConfig& config, const BandSpec& bands,
                       nlohmann::json selection) {
  return fit_bundle(train, config, bands, config.alpha_T, config.tail, std::move(selection));
}

ModelBundle fit_bundle(const TrainingSet& train, const PipelineConfig& config, const BandSpec& bands,
                       double alpha_T, const Formula& tail_formula, nlohmann::json selection) {
  const Frame& data = train.frame;
  const QuantileModelSet bulk = fit_quantile_set(data, config.bulk, bundle_grid(alpha_T), config.quantile);
  TailFitOptions tail_options;
  tail_options.smoothing_weight = config.tail_smoothing_weight;
  const TailModel tail =
      fit_tail(extract_exceedances(data, bulk, alpha_T), tail_formula, alpha_T, tail_options);
  const double p80 = empirical_quantile(data.column(config.wind_covariate), 0.8);
  return ModelBundle(train.district, bulk, tail, bands, config.wind_covariate, p80, std::move(selection));
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << bundle.to_json().dump(2) << '\n';
}

ModelBundle load_bundle(const std::string& path) { return ModelBundle::from_json(read_json(path)); }

}  // namespace xflex::pipeline
