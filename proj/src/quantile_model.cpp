#include "xflex/quantile_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "xflex/errors.hpp"
#include "xflex/optim.hpp"
#include "xflex/parallel.hpp"

namespace xflex {

namespace {

constexpr double kMadScale = 1.4826;
constexpr std::size_t kMinRows = 50;
constexpr int kCvFolds = 5;
const std::vector<double> kWeightGrid{1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
const std::vector<double> kLambdaGrid{0.01, 0.05, 0.1, 0.3};

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double raw_pinball(double u, double alpha) { return u >= 0.0 ? alpha * u : (alpha - 1.0) * u; }

std::vector<double> resolve_weights(const Formula& formula, const std::vector<double>& given) {
  if (given.empty()) return std::vector<double>(formula.smooths.size(), 1.0);
  if (given.size() != formula.smooths.size()) {
    throw ValidationError("one smoothing weight per smooth term is required");
  }
  for (double w : given) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("smoothing weights must be >= 0");
  }
  return given;
}

Eigen::VectorXd counts_vector(const Frame& f) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) y(static_cast<Eigen::Index>(i)) = static_cast<double>(f.counts[i]);
  return y;
}

// Fold label from row content, so CV folds do not depend on row order.
int content_fold(const Frame& f, std::size_t row) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(f.counts[row]));
  for (const auto& [name, values] : f.columns) mix(std::bit_cast<std::uint64_t>(values[row]));
  return static_cast<int>(h % kCvFolds);
}

// Finishes a stalled quasi-Newton run with damped Newton steps. Heavy
// penalties make the problem badly conditioned; the exact Hessian is cheap here.
void newton_polish(const PinballObjective& obj, optim::Result& res, double tol) {
  Eigen::VectorXd beta = res.x;
  Eigen::VectorXd grad(beta.size());
  double f = obj(beta, grad);
  for (int it = 0; it < 50 && grad.norm() > tol; ++it) {
    Eigen::MatrixXd hess = obj.hessian(beta);
    hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
    const Eigen::VectorXd step = -hess.ldlt().solve(grad);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool moved = false;
    Eigen::VectorXd g_new(beta.size());
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      const Eigen::VectorXd trial = beta + t * step;
      const double f_new = obj(trial, g_new);
      // Near the optimum values stop resolving; accept on gradient decrease.
      if (f_new < f || (f_new <= f + 1e-9 * (1.0 + std::abs(f)) && g_new.norm() < grad.norm())) {
        beta = trial;
        f = f_new;
        grad = g_new;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    ++res.iterations;
  }
  res.x = beta;
  res.value = f;
  res.gradient_norm = grad.norm();
  res.converged = res.gradient_norm <= tol;
}

struct LevelFits {
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<double> gradient_norms;
};

LevelFits fit_levels(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Design& design,
                     const std::vector<double>& weights, const std::vector<double>& levels,
                     double lambda, double sigma, const QuantileFitOptions& opt) {
  // Start from the penalized least-squares mean, shifted to the empirical
  // residual quantile of each level.
  Eigen::MatrixXd h = x.transpose() * x / static_cast<double>(x.rows());
  for (std::size_t t = 0; t < design.penalties().size(); ++t) {
    const auto& b = design.penalties()[t];
    h.block(b.offset, b.offset, b.size, b.size) += weights[t] * b.matrix;
  }
  h.diagonal().array() += 1e-10;
  const Eigen::VectorXd mean_beta =
      h.ldlt().solve(x.transpose() * y / static_cast<double>(x.rows()));
  Eigen::VectorXd resid = y - x * mean_beta;
  std::vector<double> sorted(resid.data(), resid.data() + resid.size());
  std::sort(sorted.begin(), sorted.end());

  LevelFits out;
  out.coefficients.resize(levels.size());
  out.gradient_norms.resize(levels.size());
  parallel_for(levels.size(), [&](std::size_t l) {
    const double alpha = levels[l];
    Eigen::VectorXd init = mean_beta;
    const auto pos = static_cast<std::size_t>(alpha * static_cast<double>(sorted.size() - 1));
    init(0) += sorted[pos];
    PinballObjective obj(x, y, design, weights, alpha, lambda, sigma);
    optim::Settings settings;
    settings.gradient_tolerance = opt.gradient_tolerance;
    settings.max_iterations = opt.max_iterations;
    auto res = optim::minimize_lbfgs(
        [&obj](const Eigen::VectorXd& b, Eigen::VectorXd& g) { return obj(b, g); }, init,
        settings);
    if (!res.converged) newton_polish(obj, res, settings.gradient_tolerance);
    if (!res.converged) {
      throw ConvergenceError("quantile fit at level " + std::to_string(alpha) +
                                 " did not converge after " + std::to_string(res.iterations) +
                                 " iterations",
                             res.gradient_norm);
    }
    out.coefficients[l] = res.x;
    out.gradient_norms[l] = res.gradient_norm;
  });
  return out;
}

// Rows sorted by count, then covariates in column-name order, so that a fit
// does not depend on the input row order even through summation rounding.
Frame canonical_rows(const Frame& data) {
  std::vector<const std::vector<double>*> cols;
  for (const auto& [name, col] : data.columns) cols.push_back(&col);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (data.counts[a] != data.counts[b]) return data.counts[a] < data.counts[b];
    for (const auto* c : cols) {
      if ((*c)[a] != (*c)[b]) return (*c)[a] < (*c)[b];
    }
    return false;
  });
  return data.subset(order);
}

double cv_score(const Frame& data, const Formula& formula, const QuantileGrid& grid,
                const QuantileFitOptions& base) {
  std::vector<int> fold(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) fold[i] = content_fold(data, i);
  double total = 0.0;
  for (int f = 0; f < kCvFolds; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < data.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    if (test.empty()) continue;
    const Frame tr = data.subset(train);
    const Frame te = data.subset(test);
    const auto model = fit_quantile_set(tr, formula, grid, base);
    const Eigen::MatrixXd pred = model.predict(te);
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      for (Eigen::Index l = 0; l < pred.cols(); ++l) {
        total += raw_pinball(static_cast<double>(te.counts[static_cast<std::size_t>(i)]) - pred(i, l),
                             grid.levels()[static_cast<std::size_t>(l)]);
      }
    }
  }
  return total;
}

}  // namespace

QuantileGrid::QuantileGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ValidationError("quantile grid must not be empty");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!(levels_[i] > 0.0 && levels_[i] < 1.0)) {
      throw ValidationError("quantile levels must lie in (0, 1)");
    }
    if (i > 0 && !(levels_[i] > levels_[i - 1])) {
      throw ValidationError("quantile levels must be strictly increasing");
    }
  }
}

std::optional<std::size_t> QuantileGrid::index_of(double level) const {
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (std::abs(levels_[i] - level) < 1e-12) return i;
  }
  return std::nullopt;
}

double smoothed_pinball(double u, double alpha, double lambda, double sigma) {
  if (!(lambda > 0.0) || !(sigma > 0.0)) {
    throw ValidationError("smoothed pinball needs lambda > 0 and sigma > 0");
  }
  return (alpha - 1.0) * u / sigma + lambda * softplus(u / (lambda * sigma));
}

double smoothed_pinball_derivative(double u, double alpha, double lambda, double sigma) {
  return ((alpha - 1.0) + logistic(u / (lambda * sigma))) / sigma;
}

double QuantileVector::at(double level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (std::abs(levels[i] - level) < 1e-12) return values[i];
  }
  throw ValidationError("level " + std::to_string(level) + " not in the quantile vector");
}

PinballObjective::PinballObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const Design& design, std::vector<double> weights, double alpha,
                                   double lambda, double sigma)
    : x_(x), y_(y), design_(design), weights_(std::move(weights)), alpha_(alpha),
      lambda_(lambda), sigma_(sigma) {}

double PinballObjective::operator()(const Eigen::VectorXd& beta, Eigen::VectorXd& grad) const {
  const Eigen::VectorXd u = y_ - x_ * beta;
  const double h = lambda_ * sigma_;
  Eigen::VectorXd d(u.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double t = u(i) / h;
    loss += (alpha_ - 1.0) * u(i) / sigma_ + lambda_ * softplus(t);
    d(i) = ((alpha_ - 1.0) + logistic(t)) / sigma_;
  }
  const double n = static_cast<double>(u.size());
  grad = -(x_.transpose() * d) / n;
  double value = loss / n;
  for (std::size_t t = 0; t < design_.penalties().size(); ++t) {
    const auto& b = design_.penalties()[t];
    const auto seg = beta.segment(b.offset, b.size);
    const Eigen::VectorXd sb = b.matrix * seg;
    value += weights_[t] * seg.dot(sb);
    grad.segment(b.offset, b.size) += 2.0 * weights_[t] * sb;
  }
  return value;
}

Eigen::MatrixXd PinballObjective::hessian(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd u = y_ - x_ * beta;
  const double h = lambda_ * sigma_;
  Eigen::VectorXd w(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double p = logistic(u(i) / h);
    w(i) = p * (1.0 - p) / (h * sigma_);
  }
  Eigen::MatrixXd hess = x_.transpose() * w.asDiagonal() * x_ / static_cast<double>(u.size());
  for (std::size_t t = 0; t < design_.penalties().size(); ++t) {
    const auto& b = design_.penalties()[t];
    hess.block(b.offset, b.offset, b.size, b.size) += 2.0 * weights_[t] * b.matrix;
  }
  return hess;
}

double PinballObjective::value(const Eigen::VectorXd& beta) const {
  Eigen::VectorXd g(beta.size());
  return (*this)(beta, g);
}

double preliminary_scale(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Design& design,
                         const std::vector<double>& weights) {
  Eigen::MatrixXd h = x.transpose() * x / static_cast<double>(x.rows());
  for (std::size_t t = 0; t < design.penalties().size(); ++t) {
    const auto& b = design.penalties()[t];
    h.block(b.offset, b.offset, b.size, b.size) += weights[t] * b.matrix;
  }
  h.diagonal().array() += 1e-10;
  const Eigen::VectorXd beta = h.ldlt().solve(x.transpose() * y / static_cast<double>(x.rows()));
  Eigen::VectorXd r = (y - x * beta).cwiseAbs();
  std::vector<double> abs_r(r.data(), r.data() + r.size());
  auto mid = abs_r.begin() + static_cast<std::ptrdiff_t>(abs_r.size() / 2);
  std::nth_element(abs_r.begin(), mid, abs_r.end());
  double med = *mid;
  if (abs_r.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(abs_r.begin(), mid));
  }
  double scale = kMadScale * med;
  if (scale > 1e-8) return scale;
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().sum() / std::max<Eigen::Index>(1, y.size() - 1));
  return sd > 1e-8 ? sd : 1.0;
}

QuantileModelSet::QuantileModelSet(QuantileGrid grid, Design design,
                                   std::vector<Eigen::VectorXd> coefficients,
                                   std::vector<double> smoothing_weights, double lambda,
                                   double sigma_hat)
    : grid_(std::move(grid)), design_(std::move(design)), coefficients_(std::move(coefficients)),
      smoothing_weights_(std::move(smoothing_weights)), lambda_(lambda), sigma_hat_(sigma_hat) {
  if (coefficients_.size() != grid_.size()) {
    throw ValidationError("one coefficient block per quantile level is required");
  }
  for (const auto& c : coefficients_) {
    if (c.size() != design_.columns()) throw ValidationError("coefficient length mismatch");
  }
  if (!(sigma_hat_ > 0.0) || !(lambda_ > 0.0)) {
    throw ValidationError("quantile model needs sigma_hat > 0 and lambda > 0");
  }
}

Eigen::VectorXd QuantileModelSet::linear_predictors(const CovariateMap& x) const {
  const Eigen::VectorXd row = design_.row(x);
  Eigen::VectorXd out(static_cast<Eigen::Index>(coefficients_.size()));
  for (std::size_t l = 0; l < coefficients_.size(); ++l) {
    out(static_cast<Eigen::Index>(l)) = row.dot(coefficients_[l]);
  }
  return out;
}

Eigen::MatrixXd QuantileModelSet::predict(const Frame& frame) const {
  const Eigen::MatrixXd x = design_.matrix(frame);
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(coefficients_.size()));
  for (std::size_t l = 0; l < coefficients_.size(); ++l) {
    out.col(static_cast<Eigen::Index>(l)) = x * coefficients_[l];
  }
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(out.cols()));
    for (Eigen::Index l = 0; l < out.cols(); ++l) row[static_cast<std::size_t>(l)] = out(i, l);
    row = rearrange(std::move(row));
    for (Eigen::Index l = 0; l < out.cols(); ++l) out(i, l) = row[static_cast<std::size_t>(l)];
  }
  return out;
}

nlohmann::json QuantileModelSet::to_json() const {
  nlohmann::json coefs = nlohmann::json::array();
  for (const auto& c : coefficients_) coefs.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  return {{"levels", grid_.levels()},
          {"design", design_.to_json()},
          {"coefficients", coefs},
          {"smoothing_weights", smoothing_weights_},
          {"lambda", lambda_},
          {"sigma_hat", sigma_hat_}};
}

QuantileModelSet QuantileModelSet::from_json(const nlohmann::json& j) {
  std::vector<Eigen::VectorXd> coefs;
  for (const auto& c : j.at("coefficients")) {
    const auto v = c.get<std::vector<double>>();
    coefs.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return QuantileModelSet(QuantileGrid(j.at("levels").get<std::vector<double>>()),
                          Design::from_json(j.at("design")), std::move(coefs),
                          j.at("smoothing_weights").get<std::vector<double>>(),
                          j.at("lambda").get<double>(), j.at("sigma_hat").get<double>());
}

QuantileModelSet fit_quantile_set(const Frame& data, const Formula& formula,
                                  const QuantileGrid& grid, const QuantileFitOptions& options) {
  data.validate();
  if (data.size() < kMinRows) {
    throw ValidationError("quantile regression needs at least 50 rows, got " +
                          std::to_string(data.size()));
  }
  if (grid.size() == 0) throw ValidationError("quantile grid must not be empty");
  if (!(options.lambda > 0.0)) throw ValidationError("bandwidth lambda must be positive");

  QuantileFitOptions opt = options;
  if (opt.smoothing.cross_validate && !formula.smooths.empty()) {
    QuantileFitOptions trial = opt;
    trial.smoothing.cross_validate = false;
    trial.select_lambda = false;
    double best = std::numeric_limits<double>::infinity();
    double chosen = 1.0;
    for (double w : kWeightGrid) {
      trial.smoothing.weights.assign(formula.smooths.size(), w);
      const double s = cv_score(data, formula, grid, trial);
      if (s < best) {
        best = s;
        chosen = w;
      }
    }
    opt.smoothing.weights.assign(formula.smooths.size(), chosen);
  }
  opt.smoothing.cross_validate = false;
  if (opt.select_lambda) {
    QuantileFitOptions trial = opt;
    trial.select_lambda = false;
    double best = std::numeric_limits<double>::infinity();
    for (double lam : kLambdaGrid) {
      trial.lambda = lam;
      const double s = cv_score(data, formula, grid, trial);
      if (s < best) {
        best = s;
        opt.lambda = lam;
      }
    }
    opt.select_lambda = false;
  }
  const std::vector<double> weights = resolve_weights(formula, opt.smoothing.weights);

  const Frame rows = canonical_rows(data);
  Design design = Design::build(rows, formula);
  const Eigen::MatrixXd x = design.matrix(rows);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw ValidationError("rank-deficient quantile design: rank " + std::to_string(qr.rank()) +
                          " of " + std::to_string(x.cols()) + " columns");
  }
  const Eigen::VectorXd y = counts_vector(rows);
  const double sigma = preliminary_scale(x, y, design, weights);

  LevelFits fits = fit_levels(x, y, design, weights, grid.levels(), opt.lambda, sigma, opt);
  QuantileModelSet model(grid, std::move(design), std::move(fits.coefficients), weights,
                         opt.lambda, sigma);
  model.gradient_norms_ = std::move(fits.gradient_norms);
  return model;
}

std::vector<double> rearrange(std::vector<double> values) {
  for (double& v : values) v = std::max(0.0, v);
  std::sort(values.begin(), values.end());
  return values;
}

QuantileVector predict_quantiles(const QuantileModelSet& model, const CovariateMap& x) {
  const Eigen::VectorXd raw = model.linear_predictors(x);
  QuantileVector out;
  out.levels = model.grid().levels();
  out.values = rearrange(std::vector<double>(raw.data(), raw.data() + raw.size()));
  return out;
}

}  // namespace xflex
