#pragma once

#include "obree/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace obree {

using DesignMatrix = Eigen::MatrixXd;
/// Binary responses, one byte per observation.
using BinaryResponses = std::vector<std::uint8_t>;

double expit(double eta);
/// log(1 + exp(eta)) without overflow.
double log1pexp(double eta);

/// How the "4/sqrt(n)" spread of the covariate distribution is read.
enum class CovariateScale { variance, sd };

std::string_view to_string(CovariateScale scale);
CovariateScale parse_covariate_scale(std::string_view name);

/// i.i.d. normal covariates with the given mean and spread 4/sqrt(n), filled
/// row by row from the stream named by key.
DesignMatrix generate_design(std::size_t n, std::size_t p, double mean, const StreamKey& key,
                             CovariateScale scale = CovariateScale::variance);

/// y_i = 1{u_i <= expit(x_i beta)} with one stream uniform per observation.
BinaryResponses simulate_responses(const DesignMatrix& X, const ParamVector& beta,
                                   RandomStream& stream);

Eigen::VectorXd to_real(const BinaryResponses& y);
Eigen::VectorXd fitted_means(const DesignMatrix& X, const ParamVector& beta);

/// (1/n) sum_i x_i (y_i - mu_i(beta)).
Eigen::VectorXd logistic_score(const DesignMatrix& X, const Eigen::VectorXd& y,
                               const ParamVector& beta);
/// sum_i y_i eta_i - log(1 + exp(eta_i)); also valid for fractional y.
double logistic_loglik(const DesignMatrix& X, const Eigen::VectorXd& y, const ParamVector& beta);
/// X^T diag(mu (1 - mu)) X.
Eigen::MatrixXd logistic_information(const DesignMatrix& X, const ParamVector& beta);

struct FitOptions {
  int max_iter = 100;
  double tol = 1e-9;               ///< on the infinity norm of the scaled score
  double divergence_bound = 1e3;   ///< ||beta||_inf beyond this declares separation
};

struct FitResult {
  ParamVector beta_hat;
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
  bool diverging = false;       ///< separation detected
  bool rank_deficient = false;

  bool ok() const { return converged && !diverging && !rank_deficient; }
};

/// Logistic MLE by IRLS with step halving. Accepts fractional responses in [0,1].
FitResult fit_mle(const DesignMatrix& X, const Eigen::VectorXd& y, const FitOptions& opts = {},
                  const ParamVector* start = nullptr);

/// Swaps responses of extreme pairs: the i-th largest mu with the i-th smallest,
/// for round(rate n / 2) pairs. Ties in mu are broken by index.
BinaryResponses contaminate(const BinaryResponses& y, std::span<const double> mu, double rate);

}  // namespace obree
