#pragma once

// Random-intercept logistic regression:
//   P(y_ij = 1 | U_i) = expit(x_ij^T beta + U_i),  U_i ~ N(0, sigma^2).

#include "obree/logistic.hpp"
#include "obree/optim.hpp"
#include "obree/quadrature.hpp"

#include <memory>
#include <string_view>

namespace obree {

/// Rows of X grouped by cluster; cluster i spans rows [offsets[i], offsets[i+1]).
struct ClusteredData {
  DesignMatrix X;
  std::vector<std::size_t> offsets;
  BinaryResponses y;  ///< empty for a design without responses

  std::size_t clusters() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t observations() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cluster_size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }

  /// Throws std::invalid_argument unless offsets partition the rows, m >= 2,
  /// and y is empty or has one entry per row.
  void validate() const;
};

/// Balanced design: an intercept column followed by `slopes` covariates drawn
/// i.i.d. N(mean, 4/sqrt(n)) with n = clusters * cluster_size.
ClusteredData make_glmm_design(std::size_t clusters, std::size_t cluster_size, std::size_t slopes,
                               double mean, const StreamKey& key,
                               CovariateScale scale = CovariateScale::variance);

struct GlmmParams {
  ParamVector beta;
  double sigma2 = 0.0;

  /// (beta, sigma^2) stacked, the parameter vector seen by the solver.
  ParamVector to_vector() const;
  static GlmmParams from_vector(const ParamVector& theta);
};

/// Draws one standard normal per cluster, then one uniform per observation,
/// so the underlying randomness is the same at every (beta, sigma).
ClusteredData simulate_glmm(const ClusteredData& design, const GlmmParams& params,
                            RandomStream& stream);

/// log of the cluster integral int prod_j Bern(y_ij; expit(eta_ij + u)) phi(u; 0, sigma^2) du
/// by Gauss-Hermite centred at the posterior mode and scaled by its curvature.
double cluster_log_integral(const ClusteredData& data, std::size_t cluster, const ParamVector& beta,
                            double sigma, const GaussHermiteRule& rule);

/// Marginal log-likelihood by adaptive Gauss-Hermite quadrature with K nodes (K odd).
/// sigma^2 = 0 evaluates the Bernoulli log-likelihood exactly.
double marginal_loglik_ghq(const ClusteredData& data, const GlmmParams& params, int K);
double marginal_loglik_ghq(const ClusteredData& data, const GlmmParams& params,
                           const GaussHermiteRule& rule);

struct GlmmFitOptions {
  int ghq_nodes = 31;
  MinimizeOptions minimize{};
  double boundary_log_sigma = -15.0;
  double divergence_bound = 1e3;
  double sigma2_divergence_bound = 1e4;
  int max_alternations = 1000;
  double tol = 1e-10;
  bool update_sigma2 = true;
  double initial_sigma2 = 1.0;
};

struct GlmmFit {
  GlmmParams params;
  bool converged = false;
  bool boundary = false;   ///< sigma^2 estimated at 0
  bool diverging = false;  ///< separation or runaway variance
  int iterations = 0;
  double gradient_norm = 0.0;
  double loglik = 0.0;

  bool ok() const { return converged && !diverging; }
};

/// Maximises the adaptive-GHQ marginal likelihood over (beta, log sigma) by BFGS
/// with central-difference gradients.
GlmmFit fit_mle_ghq(const ClusteredData& data, const GlmmFitOptions& opts = {});

/// Joint-mode estimator: maximise the penalised likelihood in (beta, u) for the
/// current sigma^2, then set sigma^2 = mean(u_i^2 + v_i) with v_i the conditional
/// Laplace variance of u_i; iterate to the fixed point. Deliberately cheap and
/// biased for sigma^2.
GlmmFit fit_joint_mode(const ClusteredData& data, const GlmmFitOptions& opts = {});

enum class GlmmEstimatorKind { joint_mode, ghq };

std::string_view to_string(GlmmEstimatorKind kind);
GlmmEstimatorKind parse_glmm_estimator(std::string_view name);

class GlmmModel final : public ModelBase<BinaryResponses> {
 public:
  GlmmModel(ClusteredData design, GlmmEstimatorKind kind, GlmmFitOptions opts = {});

  Eigen::Index dimension() const override { return design_->X.cols() + 1; }
  std::size_t sample_size() const override { return design_->observations(); }

  const ClusteredData& design() const { return *design_; }
  GlmmEstimatorKind kind() const { return kind_; }

  Dataset simulate(const ParamVector& theta, RandomStream& stream) const override;
  std::optional<ParamVector> estimate(const Dataset& data) const override;
  GlmmFit fit(const Dataset& data) const;

 private:
  std::shared_ptr<const ClusteredData> design_;
  GlmmEstimatorKind kind_;
  GlmmFitOptions opts_;
};

}  // namespace obree
