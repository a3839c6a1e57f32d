#pragma once

#include <Eigen/Dense>

#include <functional>

namespace obree {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Central differences with step rel_step * (1 + |x_j|).
Eigen::VectorXd central_difference_gradient(const Objective& f, const Eigen::VectorXd& x,
                                            double rel_step = 1e-5);

struct MinimizeOptions {
  int max_iter = 500;
  double grad_tol = 1e-6;  ///< infinity norm
  double fd_step = 1e-5;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
};

/// BFGS with Armijo backtracking on finite-difference gradients. Non-finite
/// objective values are treated as infeasible trial points.
MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0,
                             const MinimizeOptions& opts = {});

}  // namespace obree
