#include "xflex/tail_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xflex/distributions.hpp"
#include "xflex/errors.hpp"
#include "xflex/optim.hpp"

namespace xflex {

namespace {

constexpr double kXiSpan = kXiUpper - kXiLower;
constexpr double kInitXi = 0.1;

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

struct LogSurvival {
  double value;    // log S(y)
  double d_eta;    // d/d log(sigma)
  double d_xi;
};

// log S(y) for the GP with its derivatives.
LogSurvival log_survival(double y, double sigma, double xi) {
  if (y <= 0.0) return {0.0, 0.0, 0.0};
  const double z = y / sigma;
  const double t = xi * z;
  if (t <= -1.0) return {-std::numeric_limits<double>::infinity(), 0.0, 0.0};
  LogSurvival out;
  out.value = std::abs(xi) < dist::kXiZeroTolerance ? -z : -std::log1p(t) / xi;
  out.d_eta = z / (1.0 + t);
  if (std::abs(t) < 1e-3) {
    // Series of d/dxi [-log1p(xi z) / xi] around xi = 0.
    const double z2 = z * z;
    out.d_xi = z2 * (0.5 - t * (2.0 / 3.0) + t * t * 0.75 - t * t * t * 0.8 + t * t * t * t * (5.0 / 6.0));
  } else {
    out.d_xi = std::log1p(t) / (xi * xi) - z / (xi * (1.0 + t));
  }
  return out;
}

}  // namespace

double xi_from_raw(double raw) { return kXiLower + kXiSpan * logistic(raw); }

double raw_from_xi(double xi) {
  const double s = (xi - kXiLower) / kXiSpan;
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("xi outside (-0.5, 1.0)");
  return std::log(s / (1.0 - s));
}

TailModel::TailModel(double xi, Design design, Eigen::VectorXd scale_coeffs, double alpha_T,
                     std::size_t n_exceedances)
    : xi_(xi), design_(std::move(design)), scale_coeffs_(std::move(scale_coeffs)),
      alpha_T_(alpha_T), n_exceedances_(n_exceedances) {
  if (!(xi_ > kXiLower && xi_ < kXiUpper)) throw ValidationError("tail xi outside (-0.5, 1.0)");
  if (scale_coeffs_.size() != design_.columns() || !scale_coeffs_.allFinite()) {
    throw ValidationError("tail scale coefficients must be finite and match the design");
  }
  if (!(alpha_T_ > 0.0 && alpha_T_ < 1.0)) throw ValidationError("alpha_T must lie in (0, 1)");
}

nlohmann::json TailModel::to_json() const {
  return {{"xi", xi_},
          {"design", design_.to_json()},
          {"scale_coeffs", std::vector<double>(scale_coeffs_.data(), scale_coeffs_.data() + scale_coeffs_.size())},
          {"alpha_T", alpha_T_},
          {"n_exceedances", n_exceedances_},
          {"boundary", boundary},
          {"fell_back_to_constant", fell_back_to_constant},
          {"log_likelihood", log_likelihood}};
}

TailModel TailModel::from_json(const nlohmann::json& j) {
  const auto c = j.at("scale_coeffs").get<std::vector<double>>();
  TailModel m(j.at("xi").get<double>(), Design::from_json(j.at("design")),
              Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())),
              j.at("alpha_T").get<double>(), j.at("n_exceedances").get<std::size_t>());
  m.boundary = j.value("boundary", false);
  m.fell_back_to_constant = j.value("fell_back_to_constant", false);
  m.log_likelihood = j.value("log_likelihood", 0.0);
  return m;
}

Frame extract_exceedances(const Frame& data, const std::vector<double>& transition_quantiles) {
  if (transition_quantiles.size() != data.size()) {
    throw ValidationError("one transition quantile per row is required");
  }
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> ks;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto threshold = static_cast<std::int64_t>(std::ceil(transition_quantiles[i]));
    if (data.counts[i] >= threshold) {
      rows.push_back(i);
      ks.push_back(data.counts[i] - threshold);
    }
  }
  Frame out = data.subset(rows);
  out.counts = std::move(ks);
  return out;
}

Frame extract_exceedances(const Frame& data, const QuantileModelSet& bulk, double alpha_T) {
  const auto idx = bulk.grid().index_of(alpha_T);
  if (!idx) throw ValidationError("alpha_T is not one of the bulk grid levels");
  const Eigen::MatrixXd q = bulk.predict(data);
  std::vector<double> tq(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    tq[i] = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*idx));
  }
  return extract_exceedances(data, tq);
}

DgpObjective::DgpObjective(const Eigen::MatrixXd& x, std::vector<std::int64_t> ks,
                           const Design& design, double smoothing_weight)
    : x_(x), ks_(std::move(ks)), design_(design), weight_(smoothing_weight) {}

double DgpObjective::operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  const Eigen::Index p = x_.cols();
  const double s = logistic(theta(0));
  const double xi = kXiLower + kXiSpan * s;
  const double dxi_draw = kXiSpan * s * (1.0 - s);
  const Eigen::VectorXd beta = theta.tail(p);
  const Eigen::VectorXd eta = x_ * beta;

  double nll = 0.0;
  double g_xi = 0.0;
  Eigen::VectorXd g_eta(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double raw_sigma = std::exp(eta(i));
    const bool clamped = !(raw_sigma > kSigmaFloor && raw_sigma < kSigmaCeiling);
    const double sigma = std::clamp(raw_sigma, kSigmaFloor, kSigmaCeiling);
    const double k = static_cast<double>(ks_[static_cast<std::size_t>(i)]);
    const LogSurvival a = log_survival(k, sigma, xi);
    if (a.value == -std::numeric_limits<double>::infinity()) {
      return std::numeric_limits<double>::infinity();  // outside the support
    }
    const LogSurvival b = log_survival(k + 1.0, sigma, xi);
    const double r = std::exp(b.value - a.value);  // S(k+1) / S(k)
    const double mass = -std::expm1(b.value - a.value);
    if (!(mass > 0.0)) return std::numeric_limits<double>::infinity();
    nll -= a.value + std::log(mass);
    // d log pmf = (dA - r dB) / (1 - r)
    g_eta(i) = clamped ? 0.0 : -(a.d_eta - r * b.d_eta) / mass;
    g_xi -= (a.d_xi - r * b.d_xi) / mass;
  }
  const double n = static_cast<double>(eta.size());
  grad.resize(theta.size());
  grad(0) = g_xi * dxi_draw / n;
  grad.tail(p) = x_.transpose() * g_eta / n;
  double value = nll / n;
  for (const auto& blk : design_.penalties()) {
    const auto seg = beta.segment(blk.offset, blk.size);
    const Eigen::VectorXd sb = blk.matrix * seg;
    value += weight_ * seg.dot(sb);
    grad.segment(1 + blk.offset, blk.size) += 2.0 * weight_ * sb;
  }
  return value;
}

double DgpObjective::value(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g;
  return (*this)(theta, g);
}

TailModel fit_tail(const Frame& exceedances, const Formula& tail_formula, double alpha_T,
                   const TailFitOptions& options) {
  exceedances.validate();
  const std::size_t n = exceedances.size();
  if (n < kMinExceedancesConstant) {
    throw ValidationError("tail fit refused: " + std::to_string(n) +
                          " exceedances, at least " + std::to_string(kMinExceedancesConstant) +
                          " required");
  }
  Formula formula = tail_formula;
  bool fell_back = false;
  if (!formula.empty() && n < kMinExceedancesCovariate) {
    formula = Formula{};
    fell_back = true;
  }

  Design design = Design::build(exceedances, formula);
  const Eigen::MatrixXd x = design.matrix(exceedances);
  const Eigen::Index p = x.cols();

  const bool all_zero = std::all_of(exceedances.counts.begin(), exceedances.counts.end(),
                                    [](std::int64_t k) { return k == 0; });
  if (all_zero) {
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(p);
    coeffs(0) = std::log(kSigmaFloor);
    TailModel m(kInitXi, std::move(design), std::move(coeffs), alpha_T, n);
    m.boundary = true;
    m.fell_back_to_constant = fell_back;
    return m;
  }

  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(1 + p);
  if (options.init && options.init->size() == 1 + p) {
    theta0 = *options.init;
  } else {
    double mean_k = 0.0;
    for (auto k : exceedances.counts) mean_k += static_cast<double>(k);
    mean_k /= static_cast<double>(n);
    theta0(0) = raw_from_xi(kInitXi);
    theta0(1) = std::log(mean_k + 0.5);
  }

  DgpObjective obj(x, exceedances.counts, design, options.smoothing_weight);
  optim::Settings settings;
  settings.gradient_tolerance = options.gradient_tolerance;
  settings.max_iterations = options.max_iterations;
  const double init_value = obj.value(theta0);
  if (!std::isfinite(init_value)) {
    throw ValidationError("tail initialization lies outside the DGP support");
  }

  auto res = optim::minimize_lbfgs(
      [&obj](const Eigen::VectorXd& t, Eigen::VectorXd& g) { return obj(t, g); }, theta0, settings);
  if (!res.converged) {
    // Numerical-gradient restart from the last iterate.
    auto value_only = [&obj](const Eigen::VectorXd& t) { return obj.value(t); };
    auto numeric = [&](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
      const double v = obj.value(t);
      g = std::isfinite(v) ? optim::numerical_gradient(value_only, t) : Eigen::VectorXd::Zero(t.size());
      return v;
    };
    auto retry = optim::minimize_lbfgs(numeric, res.x, settings);
    if (retry.value <= res.value) res = std::move(retry);
    Eigen::VectorXd g(res.x.size());
    obj(res.x, g);
    res.gradient_norm = g.norm();
    res.converged = res.gradient_norm <= settings.gradient_tolerance;
  }
  if (!res.converged) {
    throw ConvergenceError("tail fit did not converge after " + std::to_string(res.iterations) +
                               " iterations",
                           res.gradient_norm);
  }

  TailModel m(xi_from_raw(res.x(0)), std::move(design), res.x.tail(p), alpha_T, n);
  m.fell_back_to_constant = fell_back;
  m.log_likelihood = -res.value * static_cast<double>(n);
  m.initial_log_likelihood = -init_value * static_cast<double>(n);
  m.gradient_norm = res.gradient_norm;
  m.iterations = res.iterations;
  const Eigen::VectorXd eta = x * m.scale_coeffs();
  m.boundary = (eta.array() <= std::log(kSigmaFloor)).any();
  return m;
}

double tail_scale(const TailModel& model, const CovariateMap& x) {
  const double eta = model.design().row(x).dot(model.scale_coeffs());
  return std::clamp(std::exp(eta), kSigmaFloor, kSigmaCeiling);
}

Eigen::VectorXd tail_scales(const TailModel& model, const Frame& frame) {
  Eigen::VectorXd eta = model.design().matrix(frame) * model.scale_coeffs();
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    eta(i) = std::clamp(std::exp(eta(i)), kSigmaFloor, kSigmaCeiling);
  }
  return eta;
}

}  // namespace xflex
