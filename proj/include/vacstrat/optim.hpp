#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace vacstrat::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct BfgsOptions {
  int max_iterations = 200;
  // Stop when max |gradient| falls below this.
  double gradient_tolerance = 1e-6;
  // ...or when the relative decrease over an iteration falls below this.
  double relative_tolerance = 1e-10;
  // Finite-difference step for the gradient.
  double fd_step = 1e-6;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

// Quasi-Newton minimisation with BFGS inverse-Hessian updates, forward
// difference gradients and Armijo backtracking. Non-finite objective values
// are treated as infeasible and rejected by the line search.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

Eigen::VectorXd forward_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, double step,
                                 int* evaluations = nullptr);

// Central-difference Hessian with per-coordinate steps.
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& steps);

}  // namespace vacstrat::optim
