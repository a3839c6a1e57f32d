#pragma once

// Bounded-influence M-estimator for logistic regression with Huber psi on
// Pearson residuals, leverage weights sqrt(1 - h_ii) and the exact Bernoulli
// consistency correction a(beta).

#include "obree/logistic.hpp"

#include <limits>

namespace obree {

struct HuberTuning {
  double c = 1.345;  ///< +infinity reduces psi to the identity

  static HuberTuning unbounded() { return {std::numeric_limits<double>::infinity()}; }
};

double huber_psi(double r, double c);

/// w_i = sqrt(1 - h_ii) from the hat matrix of X. Throws on rank deficiency.
Eigen::VectorXd leverage_weights(const DesignMatrix& X);
/// h_ii, the diagonal of X (X^T X)^-1 X^T.
Eigen::VectorXd hat_diagonal(const DesignMatrix& X);

/// (1/n) sum_i E_y[psi_c(r(beta, y))] w_i V^{-1/2}(mu_i) dmu_i/dbeta, the expectation
/// enumerated over y in {0,1}. Exactly zero when c is infinite.
Eigen::VectorXd consistency_correction(const DesignMatrix& X, const ParamVector& beta,
                                       const HuberTuning& tuning, const Eigen::VectorXd& weights);

/// (1/n) sum_i psi(beta, y_i), including the correction term.
Eigen::VectorXd robust_estimating_function(const DesignMatrix& X, const Eigen::VectorXd& y,
                                           const ParamVector& beta, const HuberTuning& tuning,
                                           const Eigen::VectorXd& weights);

/// Analytic Jacobian of robust_estimating_function with respect to beta.
Eigen::MatrixXd robust_jacobian(const DesignMatrix& X, const Eigen::VectorXd& y,
                                const ParamVector& beta, const HuberTuning& tuning,
                                const Eigen::VectorXd& weights);

struct PseudoResponses {
  Eigen::VectorXd values;  ///< entries in {delta, 1 - delta}
  double delta = 0.0;
};

/// y~_i = (1 - delta) y_i + delta (1 - y_i), delta in [0, 0.5).
PseudoResponses pseudo_values(const BinaryResponses& y, double delta);

struct RobustFitOptions {
  int max_iter = 100;
  double tol = 1e-8;  ///< on the infinity norm of the estimating function
  double divergence_bound = 1e3;
};

/// Damped Newton on the estimating equation, with a finite-difference Jacobian
/// fallback when the analytic step fails to reduce ||psi||.
FitResult fit_robust(const DesignMatrix& X, const Eigen::VectorXd& y, const HuberTuning& tuning,
                     const Eigen::VectorXd& weights, const RobustFitOptions& opts = {});

}  // namespace obree
