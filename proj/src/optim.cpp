#include "xflex/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace xflex::optim {

namespace {

struct Probe {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

Probe evaluate(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& dir,
               double step) {
  Probe p;
  p.step = step;
  p.x = x0 + step * dir;
  p.grad.resize(x0.size());
  p.value = f(p.x, p.grad);
  if (!std::isfinite(p.value) || !p.grad.allFinite()) {
    p.value = std::numeric_limits<double>::infinity();
    p.slope = std::numeric_limits<double>::quiet_NaN();
  } else {
    p.slope = p.grad.dot(dir);
  }
  return p;
}

// Minimizer of the cubic through (a, fa, da), (b, fb, db), safeguarded into
// the interior of [a, b].
double cubic_step(const Probe& a, const Probe& b) {
  const double lo = std::min(a.step, b.step);
  const double hi = std::max(a.step, b.step);
  const double mid = 0.5 * (lo + hi);
  if (!std::isfinite(b.value) || !std::isfinite(b.slope)) return a.step + 0.5 * (b.step - a.step);
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
  const double disc = d1 * d1 - a.slope * b.slope;
  if (disc < 0.0) return mid;
  const double d2 = std::copysign(std::sqrt(disc), b.step - a.step);
  const double t = b.step - (b.step - a.step) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return mid;
  return t;
}

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;

// Relative size of objective changes treated as rounding noise.
constexpr double kNoise = 1e-10;

// Nocedal & Wright, algorithms 3.5 / 3.6. Close to the optimum, where value
// differences drown in rounding, the sufficient-decrease test is relaxed to
// "no worse than noise" and the bracket is steered by the slope sign instead
// (approximate Wolfe conditions of Hager and Zhang).
bool line_search(const Objective& f, const Eigen::VectorXd& x0, const Probe& start,
                 const Eigen::VectorXd& dir, double initial_step, Probe& out) {
  Probe prev = start;
  double step = initial_step;
  const double noise = kNoise * (1.0 + std::abs(start.value));
  const auto within_noise = [&](const Probe& p) { return p.value <= start.value + noise; };
  const auto too_high = [&](const Probe& p, const Probe& lo) {
    if (within_noise(p) && std::isfinite(p.slope)) return p.slope > 0.0;
    return p.value > start.value + kC1 * p.step * start.slope || p.value >= lo.value;
  };
  auto zoom = [&](Probe lo, Probe hi) {
    for (int i = 0; i < 60; ++i) {
      Probe mid = evaluate(f, x0, dir, cubic_step(lo, hi));
      if (too_high(mid, lo)) {
        hi = std::move(mid);
      } else {
        if (std::abs(mid.slope) <= -kC2 * start.slope) {
          out = std::move(mid);
          return true;
        }
        if (mid.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(mid);
      }
      if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, lo.step)) break;
    }
    // Accept any decrease found, up to noise.
    if (lo.step > 0.0 && (lo.value < start.value ||
                          (within_noise(lo) && std::abs(lo.slope) < std::abs(start.slope)))) {
      out = std::move(lo);
      return true;
    }
    return false;
  };

  for (int i = 0; i < 60; ++i) {
    Probe cur = evaluate(f, x0, dir, step);
    if (!std::isfinite(cur.value)) {
      // Infeasible region: shrink toward the last good point.
      step = prev.step + 0.25 * (step - prev.step);
      if (step - prev.step < 1e-20) break;
      continue;
    }
    if (too_high(cur, prev)) {
      return zoom(prev, cur);
    }
    if (std::abs(cur.slope) <= -kC2 * start.slope) {
      out = std::move(cur);
      return true;
    }
    if (cur.slope >= 0.0) return zoom(cur, prev);
    prev = std::move(cur);
    step *= 2.0;
  }
  if (prev.step > 0.0 && within_noise(prev)) {
    out = std::move(prev);
    return true;
  }
  return false;
}

}  // namespace

Result minimize_lbfgs(const Objective& f, Eigen::VectorXd x0, const Settings& settings) {
  const Eigen::Index n = x0.size();
  Probe cur;
  cur.x = std::move(x0);
  cur.grad.resize(n);
  cur.value = f(cur.x, cur.grad);

  Result res;
  if (!std::isfinite(cur.value) || !cur.grad.allFinite()) {
    res.x = cur.x;
    res.value = cur.value;
    res.gradient_norm = std::numeric_limits<double>::infinity();
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;

  int iter = 0;
  while (cur.grad.norm() > settings.gradient_tolerance && iter < settings.max_iterations) {
    ++iter;
    // Two-loop recursion.
    Eigen::VectorXd q = cur.grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    double slope = cur.grad.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -cur.grad;
      slope = cur.grad.dot(dir);
    }

    Probe start;
    start.step = 0.0;
    start.value = cur.value;
    start.slope = slope;
    start.x = cur.x;
    start.grad = cur.grad;
    const double step0 = s_hist.empty() ? std::min(1.0, 1.0 / cur.grad.norm()) : 1.0;

    Probe next;
    if (!line_search(f, cur.x, start, dir, step0, next)) {
      if (s_hist.empty()) break;  // steepest descent failed: stalled
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    Eigen::VectorXd s = next.x - cur.x;
    Eigen::VectorXd y = next.grad - cur.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > settings.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    cur = std::move(next);
  }

  res.x = cur.x;
  res.value = cur.value;
  res.gradient_norm = cur.grad.norm();
  res.iterations = iter;
  res.converged = res.gradient_norm <= settings.gradient_tolerance;
  return res;
}

Eigen::VectorXd numerical_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + step;
    const double fp = f(xp);
    xp(i) = x(i) - step;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace xflex::optim
