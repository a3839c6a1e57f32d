#include "obree/optim.hpp"

#include <cmath>

namespace obree {

Eigen::VectorXd central_difference_gradient(const Objective& f, const Eigen::VectorXd& x,
                                            double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * (1.0 + std::abs(x(j)));
    probe(j) = x(j) + h;
    const double up = f(probe);
    probe(j) = x(j) - h;
    const double down = f(probe);
    probe(j) = x(j);
    g(j) = (up - down) / (2.0 * h);
  }
  return g;
}

MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& opts) {
  const Eigen::Index p = x0.size();
  MinimizeResult out;
  out.x = std::move(x0);
  out.value = f(out.x);
  if (!std::isfinite(out.value)) return out;
  out.gradient = central_difference_gradient(f, out.x, opts.fd_step);
  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(p, p);
  bool scaled = false;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (out.gradient.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      out.converged = true;
      return out;
    }
    Eigen::VectorXd direction = -inv_hessian * out.gradient;
    double slope = out.gradient.dot(direction);
    if (!(slope < 0.0)) {
      inv_hessian.setIdentity();
      direction = -out.gradient;
      slope = -out.gradient.squaredNorm();
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_value = 0.0;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      trial = out.x + t * direction;
      trial_value = f(trial);
      if (std::isfinite(trial_value) && trial_value <= out.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) return out;

    const Eigen::VectorXd gradient = central_difference_gradient(f, trial, opts.fd_step);
    const Eigen::VectorXd s = trial - out.x;
    const Eigen::VectorXd y = gradient - out.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hessian *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(p, p) - rho * s * y.transpose();
      inv_hessian = left * inv_hessian * left.transpose() + rho * s * s.transpose();
    }
    out.x = std::move(trial);
    out.value = trial_value;
    out.gradient = gradient;
    out.iterations = iter + 1;
  }
  out.converged = out.gradient.lpNorm<Eigen::Infinity>() <= opts.grad_tol;
  return out;
}

}  // namespace obree
