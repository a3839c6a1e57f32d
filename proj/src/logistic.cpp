#include "obree/logistic.hpp"

#include "obree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace obree {

double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double log1pexp(double eta) {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

std::string_view to_string(CovariateScale scale) {
  return scale == CovariateScale::variance ? "variance" : "sd";
}

CovariateScale parse_covariate_scale(std::string_view name) {
  if (name == "variance") return CovariateScale::variance;
  if (name == "sd") return CovariateScale::sd;
  throw ConfigError("covariate_scale: expected 'variance' or 'sd', got '" + std::string(name) + "'");
}

DesignMatrix generate_design(std::size_t n, std::size_t p, double mean, const StreamKey& key,
                             CovariateScale scale) {
  if (p < 1 || n < p) throw std::invalid_argument("generate_design: need n >= p >= 1");
  const double spread = 4.0 / std::sqrt(static_cast<double>(n));
  const double sd = scale == CovariateScale::variance ? std::sqrt(spread) : spread;
  RandomStream stream = derive_stream(key);
  DesignMatrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = mean + sd * stream.normal();
  return X;
}

BinaryResponses simulate_responses(const DesignMatrix& X, const ParamVector& beta,
                                   RandomStream& stream) {
  if (beta.size() != X.cols()) throw std::invalid_argument("simulate_responses: dim(beta) != p");
  const Eigen::VectorXd eta = X * beta;
  BinaryResponses y(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    y[static_cast<std::size_t>(i)] = stream.uniform() <= expit(eta(i)) ? 1 : 0;
  return y;
}

Eigen::VectorXd to_real(const BinaryResponses& y) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) out(static_cast<Eigen::Index>(i)) = y[i];
  return out;
}

Eigen::VectorXd fitted_means(const DesignMatrix& X, const ParamVector& beta) {
  return (X * beta).unaryExpr([](double e) { return expit(e); });
}

Eigen::VectorXd logistic_score(const DesignMatrix& X, const Eigen::VectorXd& y,
                               const ParamVector& beta) {
  return X.transpose() * (y - fitted_means(X, beta)) / static_cast<double>(X.rows());
}

namespace {

double loglik_from_eta(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
  return ll;
}

bool is_binary(const Eigen::VectorXd& y) {
  return (y.array() == 0.0 || y.array() == 1.0).all();
}

// beta strictly separates the classes: the likelihood then increases without
// bound along the ray t * beta, so no finite maximiser exists.
bool separates(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (y(i) == 1.0 ? eta(i) <= 0.0 : eta(i) >= 0.0) return false;
  }
  return true;
}

}  // namespace

double logistic_loglik(const DesignMatrix& X, const Eigen::VectorXd& y, const ParamVector& beta) {
  return loglik_from_eta(y, X * beta);
}

Eigen::MatrixXd logistic_information(const DesignMatrix& X, const ParamVector& beta) {
  const Eigen::VectorXd mu = fitted_means(X, beta);
  const Eigen::VectorXd root_w = (mu.array() * (1.0 - mu.array())).sqrt();
  const Eigen::MatrixXd Xw = root_w.asDiagonal() * X;
  return Xw.transpose() * Xw;
}

FitResult fit_mle(const DesignMatrix& X, const Eigen::VectorXd& y, const FitOptions& opts,
                  const ParamVector* start) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < p || y.size() != n) throw std::invalid_argument("fit_mle: need n >= p and |y| = n");
  if ((y.array() < 0.0).any() || (y.array() > 1.0).any())
    throw std::invalid_argument("fit_mle: responses must lie in [0,1]");

  FitResult fit;
  fit.beta_hat = start ? *start : ParamVector::Zero(p);
  const bool binary = is_binary(y);
  Eigen::VectorXd eta = X * fit.beta_hat;
  Eigen::VectorXd mu(n), score(p), Xd(n), eta_trial(n);
  Eigen::MatrixXd info(p, p);
  double ll = loglik_from_eta(y, eta);
  double norm_at_half = 0.0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    fit.iterations = iter;
    mu = eta.unaryExpr([](double e) { return expit(e); });
    score.noalias() = X.transpose() * (y - mu);
    fit.score_norm = score.lpNorm<Eigen::Infinity>() / static_cast<double>(n);
    if (fit.score_norm <= opts.tol) {
      fit.converged = true;
      return fit;
    }
    if (binary && separates(y, eta)) {
      fit.diverging = true;
      return fit;
    }

    const Eigen::VectorXd root_w = (mu.array() * (1.0 - mu.array())).sqrt();
    const Eigen::MatrixXd Xw = root_w.asDiagonal() * X;
    info.setZero();
    info.selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
      fit.rank_deficient = true;
      return fit;
    }
    const Eigen::VectorXd step = llt.solve(score);
    if (!step.allFinite()) {
      fit.rank_deficient = true;
      return fit;
    }
    Xd.noalias() = X * step;

    double t = 1.0;
    double ll_trial = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      eta_trial = eta + t * Xd;
      ll_trial = loglik_from_eta(y, eta_trial);
      if (ll_trial >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    fit.beta_hat += t * step;
    fit.iterations = iter + 1;
    eta.swap(eta_trial);
    ll = ll_trial;

    const double norm = fit.beta_hat.lpNorm<Eigen::Infinity>();
    if (norm > opts.divergence_bound) {
      fit.diverging = true;
      return fit;
    }
    if (iter + 1 == opts.max_iter / 2) norm_at_half = norm;
  }

  mu = eta.unaryExpr([](double e) { return expit(e); });
  fit.score_norm = (X.transpose() * (y - mu)).lpNorm<Eigen::Infinity>() / static_cast<double>(n);
  fit.converged = fit.score_norm <= opts.tol;
  // Budget exhausted while the coefficients keep growing: treat as separation.
  if (!fit.converged && binary && fit.beta_hat.lpNorm<Eigen::Infinity>() > norm_at_half + 1.0)
    fit.diverging = true;
  return fit;
}

BinaryResponses contaminate(const BinaryResponses& y, std::span<const double> mu, double rate) {
  if (mu.size() != y.size()) throw std::invalid_argument("contaminate: |mu| != |y|");
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("contaminate: rate must be in [0,1)");
  const double n = static_cast<double>(y.size());
  if (rate == 0.0) return y;
  if (rate * n < 2.0) throw std::invalid_argument("contaminate: rate * n must be >= 2");

  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mu[a] > mu[b]; });
  const auto pairs = static_cast<std::size_t>(std::lround(rate * n / 2.0));
  BinaryResponses out = y;
  for (std::size_t k = 0; k < pairs; ++k) {
    const std::size_t high = order[k];
    const std::size_t low = order[order.size() - 1 - k];
    std::swap(out[high], out[low]);
  }
  return out;
}

}  // namespace obree
