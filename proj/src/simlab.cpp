#include "xflex/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "xflex/csv.hpp"
#include "xflex/errors.hpp"
#include "xflex/parallel.hpp"
#include "xflex/quantile_model.hpp"
#include "xflex/splice.hpp"
#include "xflex/tail_model.hpp"

namespace xflex::sim {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

const std::vector<double> kBulkLevelsLow{0.05, 0.25, 0.5, 0.75};
const std::vector<double> kTailLevels{0.95, 0.99, 0.999, 0.9999};

Formula bulk_formula(int scenario_id) {
  Formula f;
  f.smooths.push_back(SplineSpec{"z1"});
  if (scenario_id != 1) f.smooths.push_back(SplineSpec{"z2"});
  return f;
}

Formula tail_formula(int scenario_id) {
  Formula f;
  if (scenario_id == 2) f.linear.push_back("z2");
  if (scenario_id == 3) f.smooths.push_back(SplineSpec{"z2"});
  return f;
}

QuantileFitOptions bulk_options(const ScenarioConfig& c) {
  QuantileFitOptions o;
  o.lambda = c.fit.lambda;
  o.smoothing.weights.assign(bulk_formula(c.scenario_id).smooths.size(), c.fit.bulk_smoothing_weight);
  return o;
}

TailFitOptions tail_options(const ScenarioConfig& c) {
  TailFitOptions o;
  o.smoothing_weight = c.fit.tail_smoothing_weight;
  return o;
}

CovariatePool make_pool(const ScenarioConfig& c) {
  if (c.covariate_path) return load_covariates(*c.covariate_path);
  return synthetic_covariates(c.synthetic, derive_seed(c.seed, 0xC0FA));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nan("");
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<std::vector<double>> true_quantiles(const ScenarioConfig& c, const Frame& data,
                                                const std::vector<double>& levels) {
  const auto& z1 = data.column("z1");
  const auto& z2 = data.column("z2");
  std::vector<std::vector<double>> out(data.size(), std::vector<double>(levels.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const DgDgp law = scenario_law(c, z1[i], z2[i]);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      out[i][l] = static_cast<double>(law.quantile(levels[l]));
    }
  }
  return out;
}

}  // namespace

CovariatePool synthetic_covariates(const SyntheticCovariates& spec, std::uint64_t seed) {
  if (!(spec.wind_median > 0.0 && spec.wind_sdlog > 0.0 && spec.precip_shape > 0.0 &&
        spec.precip_scale > 0.0 && std::abs(spec.rho) < 1.0 && spec.pool_size > 0)) {
    throw ValidationError("invalid synthetic covariate specification");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  CovariatePool pool;
  pool.z1.resize(spec.pool_size);
  pool.z2.resize(spec.pool_size);
  const double mix = std::sqrt(1.0 - spec.rho * spec.rho);
  for (std::size_t i = 0; i < spec.pool_size; ++i) {
    const double g1 = normal(rng);
    const double g2 = spec.rho * g1 + mix * normal(rng);
    pool.z1[i] = spec.wind_median * std::exp(spec.wind_sdlog * g1);
    const double u = std::clamp(0.5 * std::erfc(-g2 / std::sqrt(2.0)), 1e-12, 1.0 - 1e-12);
    pool.z2[i] = spec.precip_scale * boost::math::gamma_p_inv(spec.precip_shape, u);
  }
  return pool;
}

CovariatePool load_covariates(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t c1 = t.column("z1");
  const std::size_t c2 = t.column("z2");
  CovariatePool pool;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    pool.z1.push_back(parse_double(t.rows[r][c1], where));
    pool.z2.push_back(parse_double(t.rows[r][c2], where));
  }
  if (pool.size() == 0) throw ValidationError(path + ": no covariate rows");
  return pool;
}

void ScenarioConfig::validate() const {
  if (scenario_id < 1 || scenario_id > 3) throw ValidationError("scenario must be 1, 2 or 3");
  if (!(phi > 0.0 && phi < 0.5)) throw ValidationError("phi must lie in (0, 0.5)");
  if (n_per_rep < 100) throw ValidationError("n_per_rep must be at least 100");
  if (n_reps < 1) throw ValidationError("n_reps must be positive");
  if (!(theta_B.kappa > 0.0)) throw ValidationError("bulk shape must be positive");
  if (!(theta_T.sigma > 0.0)) throw ValidationError("tail scale must be positive");
  if (!(theta_T.xi > kXiLower && theta_T.xi < kXiUpper)) throw ValidationError("tail shape out of range");
}

ScenarioConfig ScenarioConfig::preset(int scenario_id, double xi) {
  ScenarioConfig c;
  c.scenario_id = scenario_id;
  c.theta_T.xi = xi;
  c.theta_T.covariate_scale = scenario_id == 2;
  c.validate();
  return c;
}

std::int64_t dgdgp_threshold(const dist::DiscreteGammaParams& bulk, double phi) {
  if (!(phi > 0.0 && phi < 1.0)) throw ValidationError("phi must lie in (0, 1)");
  return dist::dgamma_quantile(1.0 - phi, bulk);
}

DgDgp::DgDgp(dist::DiscreteGammaParams bulk, dist::GpParams tail, double phi)
    : bulk_(bulk), tail_(tail), u_(dgdgp_threshold(bulk, phi)) {
  tail_.validate();
  bulk_below_ = u_ > 0 ? dist::dgamma_cdf(u_ - 1, bulk_) : 0.0;
}

double DgDgp::pmf(std::int64_t k) const {
  if (k < 0) return 0.0;
  if (k < u_) return dist::dgamma_pmf(k, bulk_);
  return tail_weight() * dist::dgp_pmf(k - u_, tail_);
}

double DgDgp::cdf(std::int64_t k) const {
  if (k < 0) return 0.0;
  if (k < u_) return dist::dgamma_cdf(k, bulk_);
  return bulk_below_ + tail_weight() * dist::dgp_cdf(k - u_, tail_);
}

std::int64_t DgDgp::quantile(double p) const {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("level must lie in [0, 1)");
  std::int64_t k = 0;
  if (p <= bulk_below_) {
    k = std::min(dist::dgamma_quantile(p, bulk_), u_ - 1);
  } else {
    const double r = std::min((p - bulk_below_) / tail_weight(), 1.0 - 1e-16);
    k = u_ + dist::dgp_quantile(r, tail_);
  }
  // Guard the boundary against rounding in the rescaling.
  while (cdf(k) < p) ++k;
  while (k > 0 && cdf(k - 1) >= p) --k;
  return k;
}

DgDgp scenario_law(const ScenarioConfig& c, double z1, double z2) {
  const dist::DiscreteGammaParams bulk{c.theta_B.kappa, std::exp(c.theta_B.beta0 + c.theta_B.beta1 * z1)};
  const bool cov = c.scenario_id == 2 && c.theta_T.covariate_scale;
  const double sigma = cov ? std::exp(c.theta_T.beta0 + c.theta_T.beta1 * z2) : c.theta_T.sigma;
  return DgDgp(bulk, dist::GpParams{sigma, c.theta_T.xi}, c.phi);
}

Frame sample_scenario(const ScenarioConfig& c, const CovariatePool& pool, std::size_t rep) {
  c.validate();
  if (pool.size() == 0) throw ValidationError("empty covariate pool");
  std::mt19937_64 rng(derive_seed(c.seed, static_cast<std::uint64_t>(c.scenario_id), rep));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Frame f;
  auto& z1 = f.columns["z1"];
  auto& z2 = f.columns["z2"];
  f.counts.reserve(c.n_per_rep);
  for (std::size_t i = 0; i < c.n_per_rep; ++i) {
    const std::size_t j = pick(rng);
    z1.push_back(pool.z1[j]);
    z2.push_back(pool.z2[j]);
    f.counts.push_back(scenario_law(c, pool.z1[j], pool.z2[j]).quantile(unif(rng)));
  }
  return f;
}

std::vector<double> evaluation_levels() {
  return {0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999, 0.9999};
}

double ScenarioResult::mean(const std::vector<std::vector<double>>& rmse, std::size_t level) const {
  std::vector<double> v;
  for (const auto& r : rmse) v.push_back(r[level]);
  return mean_of(v);
}

double ScenarioResult::sd(const std::vector<std::vector<double>>& rmse, std::size_t level) const {
  std::vector<double> v;
  for (const auto& r : rmse) v.push_back(r[level]);
  return sd_of(v);
}

ScenarioResult run_scenario(const ScenarioConfig& c) {
  c.validate();
  const CovariatePool pool = make_pool(c);
  const double alpha_T = 1.0 - c.phi;
  const std::vector<double> levels = evaluation_levels();
  std::vector<double> grid_levels = kBulkLevelsLow;
  grid_levels.push_back(alpha_T);
  std::vector<double> extra_levels;
  for (double a : levels) {
    if (a > alpha_T + 1e-12) extra_levels.push_back(a);
  }
  const Formula bf = bulk_formula(c.scenario_id);
  const Formula tf = tail_formula(c.scenario_id);

  struct RepOutcome {
    bool ok = false;
    std::vector<double> flex, bulk_only, true_sum;
    std::string error;
  };
  std::vector<RepOutcome> outcomes(c.n_reps);

  parallel_for(c.n_reps, [&](std::size_t rep) {
    RepOutcome& out = outcomes[rep];
    try {
      const Frame data = sample_scenario(c, pool, rep);
      const auto truth = true_quantiles(c, data, levels);
      const auto bulk = fit_quantile_set(data, bf, QuantileGrid(grid_levels), bulk_options(c));
      const auto extreme = fit_quantile_set(data, bf, QuantileGrid(extra_levels), bulk_options(c));
      const Eigen::MatrixXd qb = bulk.predict(data);
      const Eigen::MatrixXd qe = extreme.predict(data);
      std::vector<double> transition(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        transition[i] = qb(static_cast<Eigen::Index>(i), qb.cols() - 1);
      }
      const TailModel tail = fit_tail(extract_exceedances(data, transition), tf, alpha_T, tail_options(c));

      std::vector<std::vector<double>> est_flex(data.size()), est_bulk(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        QuantileVector qv{grid_levels, std::vector<double>(grid_levels.size())};
        for (std::size_t l = 0; l < grid_levels.size(); ++l) qv.values[l] = qb(r, static_cast<Eigen::Index>(l));
        const PredictiveDistribution d = splice_cdf(qv, alpha_T, tail, data.row(i));
        // Shared bulk: both methods report the regression values at grid levels.
        est_flex[i] = qv.values;
        est_bulk[i] = qv.values;
        double running = qv.values.back();
        for (std::size_t l = 0; l < extra_levels.size(); ++l) {
          est_flex[i].push_back(static_cast<double>(d.quantile(extra_levels[l])));
          running = std::max(running, qe(r, static_cast<Eigen::Index>(l)));
          est_bulk[i].push_back(running);
        }
      }
      out.flex = rmse_quantiles(est_flex, truth);
      out.bulk_only = rmse_quantiles(est_bulk, truth);
      out.true_sum.assign(levels.size(), 0.0);
      for (const auto& row : truth) {
        for (std::size_t l = 0; l < levels.size(); ++l) out.true_sum[l] += row[l] / static_cast<double>(truth.size());
      }
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = "replication " + std::to_string(rep) + ": " + e.what();
    }
  });

  ScenarioResult res;
  res.levels = levels;
  res.mean_true_quantile.assign(levels.size(), 0.0);
  for (std::size_t rep = 0; rep < outcomes.size(); ++rep) {
    auto& o = outcomes[rep];
    if (!o.ok) {
      res.failures.push_back(o.error);
      continue;
    }
    res.replicate_ids.push_back(rep);
    res.flex.push_back(std::move(o.flex));
    res.bulk_only.push_back(std::move(o.bulk_only));
    for (std::size_t l = 0; l < levels.size(); ++l) res.mean_true_quantile[l] += o.true_sum[l];
  }
  if (!res.replicate_ids.empty()) {
    for (double& v : res.mean_true_quantile) v /= static_cast<double>(res.replicate_ids.size());
  }
  return res;
}

void ScanConfig::validate() const {
  base.validate();
  if (grid.empty()) throw ValidationError("threshold grid must not be empty");
  for (double a : grid) {
    if (!(a > 0.75 && a < 1.0)) throw ValidationError("threshold grid values must lie in (0.75, 1)");
  }
  if (eval_levels.empty()) throw ValidationError("evaluation levels must not be empty");
}

ScanConfig ScanConfig::around(const ScenarioConfig& base) {
  ScanConfig s;
  s.base = base;
  for (int i = -5; i <= 5; ++i) s.grid.push_back(std::round((1.0 - base.phi + 0.01 * i) * 100.0) / 100.0);
  s.eval_levels = kTailLevels;
  s.validate();
  return s;
}

ScanResult threshold_scan(const ScanConfig& config) {
  config.validate();
  const ScenarioConfig& c = config.base;
  const CovariatePool pool = make_pool(c);
  const Formula bf = bulk_formula(c.scenario_id);
  const Formula tf = tail_formula(c.scenario_id);
  const std::size_t ng = config.grid.size();
  const std::size_t nl = config.eval_levels.size();

  struct CellRep {
    bool ok = false;
    std::vector<double> rmse;
    double xi = 0.0, log_sigma = 0.0;
    std::string error;
  };
  std::vector<std::vector<CellRep>> reps(c.n_reps, std::vector<CellRep>(ng));
  std::vector<std::vector<double>> true_means(c.n_reps);

  parallel_for(c.n_reps, [&](std::size_t rep) {
    Frame data;
    std::vector<std::vector<double>> truth;
    std::optional<QuantileModelSet> low;
    try {
      data = sample_scenario(c, pool, rep);
      truth = true_quantiles(c, data, config.eval_levels);
      low.emplace(fit_quantile_set(data, bf, QuantileGrid(kBulkLevelsLow), bulk_options(c)));
    } catch (const std::exception& e) {
      for (auto& cell : reps[rep]) cell.error = "replication " + std::to_string(rep) + ": " + e.what();
      return;
    }
    true_means[rep].assign(nl, 0.0);
    for (const auto& row : truth) {
      for (std::size_t l = 0; l < nl; ++l) true_means[rep][l] += row[l] / static_cast<double>(truth.size());
    }
    const Eigen::MatrixXd ql = low->predict(data);
    for (std::size_t g = 0; g < ng; ++g) {
      CellRep& cell = reps[rep][g];
      const double alpha_T = config.grid[g];
      try {
        const auto top = fit_quantile_set(data, bf, QuantileGrid({alpha_T}), bulk_options(c));
        const Eigen::MatrixXd qt = top.predict(data);
        std::vector<double> levels = kBulkLevelsLow;
        levels.push_back(alpha_T);
        std::vector<QuantileVector> qvs(data.size());
        std::vector<double> transition(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          std::vector<double> vals{ql(r, 0), ql(r, 1), ql(r, 2), ql(r, 3), qt(r, 0)};
          qvs[i] = QuantileVector{levels, rearrange(vals)};
          transition[i] = qvs[i].values.back();
        }
        const TailModel tail = fit_tail(extract_exceedances(data, transition), tf, alpha_T, tail_options(c));
        std::vector<std::vector<double>> est(data.size(), std::vector<double>(nl));
        double log_sigma_sum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
          const CovariateMap x = data.row(i);
          const double sigma = tail_scale(tail, x);
          log_sigma_sum += std::log(sigma);
          const PredictiveDistribution d = splice_cdf(qvs[i], alpha_T, dist::GpParams{sigma, tail.xi()});
          for (std::size_t l = 0; l < nl; ++l) {
            // Eval levels at or below alpha_T stay on the regression quantile.
            est[i][l] = config.eval_levels[l] <= alpha_T + 1e-12 ? qvs[i].at(config.eval_levels[l])
                        : static_cast<double>(d.quantile(config.eval_levels[l]));
          }
        }
        cell.rmse = rmse_quantiles(est, truth);
        cell.xi = tail.xi();
        cell.log_sigma = log_sigma_sum / static_cast<double>(data.size());
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = "replication " + std::to_string(rep) + ": " + e.what();
      }
    }
  });

  ScanResult res;
  res.eval_levels = config.eval_levels;
  for (std::size_t g = 0; g < ng; ++g) {
    ScanCell cell;
    cell.alpha_T = config.grid[g];
    std::vector<double> rmse_sum(nl, 0.0), true_sum(nl, 0.0);
    std::size_t ok = 0;
    for (std::size_t rep = 0; rep < c.n_reps; ++rep) {
      const CellRep& r = reps[rep][g];
      if (!r.ok) {
        cell.failures.push_back(r.error);
        continue;
      }
      ++ok;
      cell.xi_hat.push_back(r.xi);
      cell.log_sigma_hat.push_back(r.log_sigma);
      for (std::size_t l = 0; l < nl; ++l) {
        rmse_sum[l] += r.rmse[l];
        true_sum[l] += true_means[rep][l];
      }
    }
    cell.scaled_rmse.assign(nl, std::nan(""));
    if (ok > 0) {
      for (std::size_t l = 0; l < nl; ++l) cell.scaled_rmse[l] = rmse_sum[l] / true_sum[l];
    }
    cell.xi_mean = mean_of(cell.xi_hat);
    cell.xi_sd = sd_of(cell.xi_hat);
    cell.log_sigma_mean = mean_of(cell.log_sigma_hat);
    cell.log_sigma_sd = sd_of(cell.log_sigma_hat);
    res.cells.push_back(std::move(cell));
  }
  return res;
}

SpearmanResult xi_dispersion_trend(const ScanResult& scan, double from_alpha) {
  std::vector<double> alpha, dev;
  for (const auto& cell : scan.cells) {
    if (cell.alpha_T < from_alpha - 1e-12) continue;
    for (double x : cell.xi_hat) {
      alpha.push_back(cell.alpha_T);
      dev.push_back(std::abs(x - cell.xi_mean));
    }
  }
  return spearman(alpha, dev);
}

}  // namespace xflex::sim
