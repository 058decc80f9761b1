#pragma once

// Limited-memory BFGS with a strong-Wolfe line search. Used by the quantile
// and tail fits; both objectives are smooth.

#include <functional>

#include <Eigen/Dense>

namespace xflex::optim {

/// Returns f(x) and writes the gradient. A non-finite value marks x as
/// infeasible; the line search then shortens the step.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct Settings {
  double gradient_tolerance = 1e-6;
  int max_iterations = 10000;
  int memory = 10;
};

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

Result minimize_lbfgs(const Objective& f, Eigen::VectorXd x0, const Settings& settings = {});

/// Central-difference gradient with step h * max(1, |x_i|).
Eigen::VectorXd numerical_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6);

}  // namespace xflex::optim
