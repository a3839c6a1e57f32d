#include "obree/robust_logistic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace obree {

namespace {

constexpr double kMuFloor = 1e-12;

struct ObsTerms {
  double mu;
  double s;  // sqrt(V(mu)), also V^{-1/2} dmu/deta
};

ObsTerms obs_terms(double eta) {
  const double mu = std::clamp(expit(eta), kMuFloor, 1.0 - kMuFloor);
  return {mu, std::sqrt(mu * (1.0 - mu))};
}

double huber_slope(double r, double c) { return std::abs(r) <= c ? 1.0 : 0.0; }

// E_y[psi_c(r(y))] over y ~ Bernoulli(mu).
double expected_psi(const ObsTerms& t, double c) {
  if (std::isinf(c)) return 0.0;
  const double r1 = (1.0 - t.mu) / t.s;
  const double r0 = -t.mu / t.s;
  return huber_psi(r1, c) * t.mu + huber_psi(r0, c) * (1.0 - t.mu);
}

// d/deta of r(eta, y) = (y - mu) / s.
double residual_slope(double r, const ObsTerms& t) { return -t.s - r * (1.0 - 2.0 * t.mu) / 2.0; }

double expected_psi_slope(const ObsTerms& t, double c) {
  if (std::isinf(c)) return 0.0;
  const double r1 = (1.0 - t.mu) / t.s;
  const double r0 = -t.mu / t.s;
  const double v = t.s * t.s;
  return huber_slope(r1, c) * residual_slope(r1, t) * t.mu + huber_psi(r1, c) * v +
         huber_slope(r0, c) * residual_slope(r0, t) * (1.0 - t.mu) - huber_psi(r0, c) * v;
}

Eigen::MatrixXd fd_jacobian(const DesignMatrix& X, const Eigen::VectorXd& y,
                            const ParamVector& beta, const HuberTuning& tuning,
                            const Eigen::VectorXd& weights) {
  const Eigen::Index p = beta.size();
  Eigen::MatrixXd J(p, p);
  ParamVector probe = beta;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(beta(j)));
    probe(j) = beta(j) + h;
    const Eigen::VectorXd up = robust_estimating_function(X, y, probe, tuning, weights);
    probe(j) = beta(j) - h;
    const Eigen::VectorXd down = robust_estimating_function(X, y, probe, tuning, weights);
    probe(j) = beta(j);
    J.col(j) = (up - down) / (2.0 * h);
  }
  return J;
}

}  // namespace

double huber_psi(double r, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("huber_psi: c must be positive");
  if (std::abs(r) <= c) return r;
  return r > 0.0 ? c : -c;
}

Eigen::VectorXd hat_diagonal(const DesignMatrix& X) {
  Eigen::ColPivHouseholderQR<DesignMatrix> qr(X);
  if (qr.rank() < X.cols()) throw std::invalid_argument("leverage_weights: X is rank deficient");
  const Eigen::MatrixXd Q =
      qr.householderQ() * Eigen::MatrixXd::Identity(X.rows(), X.cols());
  return Q.rowwise().squaredNorm();
}

Eigen::VectorXd leverage_weights(const DesignMatrix& X) {
  return hat_diagonal(X).unaryExpr([](double h) { return std::sqrt(std::max(0.0, 1.0 - h)); });
}

Eigen::VectorXd consistency_correction(const DesignMatrix& X, const ParamVector& beta,
                                       const HuberTuning& tuning, const Eigen::VectorXd& weights) {
  if (std::isinf(tuning.c)) return Eigen::VectorXd::Zero(X.cols());
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd coef(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const ObsTerms t = obs_terms(eta(i));
    coef(i) = expected_psi(t, tuning.c) * weights(i) * t.s;
  }
  return X.transpose() * coef / static_cast<double>(X.rows());
}

Eigen::VectorXd robust_estimating_function(const DesignMatrix& X, const Eigen::VectorXd& y,
                                           const ParamVector& beta, const HuberTuning& tuning,
                                           const Eigen::VectorXd& weights) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd coef(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const ObsTerms t = obs_terms(eta(i));
    const double r = (y(i) - t.mu) / t.s;
    coef(i) = (huber_psi(r, tuning.c) - expected_psi(t, tuning.c)) * weights(i) * t.s;
  }
  return X.transpose() * coef / static_cast<double>(X.rows());
}

Eigen::MatrixXd robust_jacobian(const DesignMatrix& X, const Eigen::VectorXd& y,
                                const ParamVector& beta, const HuberTuning& tuning,
                                const Eigen::VectorXd& weights) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd slope(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const ObsTerms t = obs_terms(eta(i));
    const double r = (y(i) - t.mu) / t.s;
    const double ds = (1.0 - 2.0 * t.mu) * t.s / 2.0;
    const double centred = huber_psi(r, tuning.c) - expected_psi(t, tuning.c);
    const double dcentred =
        huber_slope(r, tuning.c) * residual_slope(r, t) - expected_psi_slope(t, tuning.c);
    slope(i) = weights(i) * (ds * centred + t.s * dcentred);
  }
  return X.transpose() * slope.asDiagonal() * X / static_cast<double>(X.rows());
}

PseudoResponses pseudo_values(const BinaryResponses& y, double delta) {
  if (!(delta >= 0.0 && delta < 0.5))
    throw std::invalid_argument("pseudo_values: delta must be in [0, 0.5)");
  PseudoResponses out{Eigen::VectorXd(static_cast<Eigen::Index>(y.size())), delta};
  for (std::size_t i = 0; i < y.size(); ++i)
    out.values(static_cast<Eigen::Index>(i)) = (1.0 - delta) * y[i] + delta * (1.0 - y[i]);
  return out;
}

FitResult fit_robust(const DesignMatrix& X, const Eigen::VectorXd& y, const HuberTuning& tuning,
                     const Eigen::VectorXd& weights, const RobustFitOptions& opts) {
  if (!(tuning.c > 0.0)) throw std::invalid_argument("fit_robust: c must be positive");
  if (weights.size() != X.rows() || y.size() != X.rows())
    throw std::invalid_argument("fit_robust: size mismatch");

  FitResult fit;
  const FitResult start = fit_mle(X, y);
  fit.beta_hat = start.ok() ? start.beta_hat : ParamVector::Zero(X.cols());

  Eigen::VectorXd psi = robust_estimating_function(X, y, fit.beta_hat, tuning, weights);
  double merit = psi.squaredNorm();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    fit.score_norm = psi.lpNorm<Eigen::Infinity>();
    if (fit.score_norm <= opts.tol) {
      fit.converged = true;
      return fit;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const Eigen::MatrixXd J = attempt == 0
                                    ? robust_jacobian(X, y, fit.beta_hat, tuning, weights)
                                    : fd_jacobian(X, y, fit.beta_hat, tuning, weights);
      const Eigen::VectorXd step = J.partialPivLu().solve(-psi);
      if (!step.allFinite()) continue;
      double t = 1.0;
      for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
        const ParamVector trial = fit.beta_hat + t * step;
        Eigen::VectorXd psi_trial = robust_estimating_function(X, y, trial, tuning, weights);
        const double merit_trial = psi_trial.squaredNorm();
        if (merit_trial < merit) {
          fit.beta_hat = trial;
          psi.swap(psi_trial);
          merit = merit_trial;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
    fit.iterations = iter + 1;
    if (fit.beta_hat.lpNorm<Eigen::Infinity>() > opts.divergence_bound) {
      fit.diverging = true;
      break;
    }
  }
  fit.score_norm = psi.lpNorm<Eigen::Infinity>();
  fit.converged = !fit.diverging && fit.score_norm <= opts.tol;
  return fit;
}

}  // namespace obree
