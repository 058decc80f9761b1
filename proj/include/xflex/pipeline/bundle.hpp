#pragma once

// Pipeline configuration and the persisted per-district model bundle.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xflex/banding.hpp"
#include "xflex/pipeline/io.hpp"
#include "xflex/quantile_model.hpp"
#include "xflex/splice.hpp"
#include "xflex/tail_model.hpp"

namespace xflex::pipeline {

inline constexpr int kBundleSchemaVersion = 1;

struct PipelineConfig {
  Formula bulk;
  Formula tail;
  double alpha_T = 0.9;
  std::vector<double> candidate_alphas{0.75, 0.8, 0.9, 0.95};
  std::vector<Formula> candidate_tails;  ///< empty means {tail}
  QuantileFitOptions quantile;
  double tail_smoothing_weight = 1.0;
  std::string wind_covariate = "ws10_max";

  /// Covariates named by the bulk, tail and candidate formulas.
  std::vector<std::string> covariates() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

PipelineConfig load_config(const std::string& path);

/// JSON list of {"district", "tau_AG", "tau_RA", "resolution_hours"}.
std::map<std::string, BandSpec> load_bands(const std::string& path);
const BandSpec& band_for(const std::map<std::string, BandSpec>& bands, const std::string& district);

/// Fitting grid {0.05, 0.25, 0.5, alpha_T}.
QuantileGrid bundle_grid(double alpha_T);

class ModelBundle {
 public:
  ModelBundle(std::string district, QuantileModelSet bulk, TailModel tail, BandSpec bands,
              std::string wind_covariate, double wind_p80, nlohmann::json selection);

  int schema_version() const { return kBundleSchemaVersion; }
  const std::string& district() const { return district_; }
  const QuantileModelSet& bulk() const { return bulk_; }
  const TailModel& tail() const { return tail_; }
  const BandSpec& bands() const { return bands_; }
  double alpha_T() const { return tail_.alpha_T(); }
  const std::string& wind_covariate() const { return wind_covariate_; }
  /// 80th percentile of the wind covariate on the training rows.
  double wind_p80() const { return wind_p80_; }
  const nlohmann::json& selection() const { return selection_; }
  std::vector<std::string> covariates() const;

  PredictiveDistribution predict(const CovariateMap& x) const;
  PredictiveDistribution predict_bulk_only(const CovariateMap& x) const;

  nlohmann::json to_json() const;
  /// Throws ValidationError when the schema version is missing or different.
  static ModelBundle from_json(const nlohmann::json& j);

 private:
  std::string district_;
  QuantileModelSet bulk_;
  TailModel tail_;
  BandSpec bands_;
  std::string wind_covariate_;
  double wind_p80_;
  nlohmann::json selection_;
};

ModelBundle fit_bundle(const TrainingSet& train, const PipelineConfig& config, const BandSpec& bands,
                       nlohmann::json selection = nullptr);
/// Fits with an explicit transition level and tail formula, overriding the config.
ModelBundle fit_bundle(const TrainingSet& train, const PipelineConfig& config, const BandSpec& bands,
                       double alpha_T, const Formula& tail_formula, nlohmann::json selection = nullptr);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace xflex::pipeline
