#include "obree/glmm.hpp"

#include "obree/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace obree {

void ClusteredData::validate() const {
  if (offsets.size() < 3) throw std::invalid_argument("ClusteredData: need at least 2 clusters");
  if (offsets.front() != 0 || offsets.back() != observations())
    throw std::invalid_argument("ClusteredData: offsets must span all rows");
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i)
    if (offsets[i + 1] <= offsets[i]) throw std::invalid_argument("ClusteredData: empty cluster");
  if (!y.empty() && y.size() != observations())
    throw std::invalid_argument("ClusteredData: |y| must equal the number of rows");
}

ClusteredData make_glmm_design(std::size_t clusters, std::size_t cluster_size, std::size_t slopes,
                               double mean, const StreamKey& key, CovariateScale scale) {
  if (clusters < 2 || cluster_size < 1)
    throw std::invalid_argument("make_glmm_design: need m >= 2 and cluster_size >= 1");
  const std::size_t n = clusters * cluster_size;
  ClusteredData data;
  data.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(slopes + 1));
  data.X.col(0).setOnes();
  if (slopes > 0) data.X.rightCols(static_cast<Eigen::Index>(slopes)) =
      generate_design(n, slopes, mean, key, scale);
  data.offsets.resize(clusters + 1);
  for (std::size_t i = 0; i <= clusters; ++i) data.offsets[i] = i * cluster_size;
  return data;
}

ParamVector GlmmParams::to_vector() const {
  ParamVector theta(beta.size() + 1);
  theta << beta, sigma2;
  return theta;
}

GlmmParams GlmmParams::from_vector(const ParamVector& theta) {
  if (theta.size() < 2) throw std::invalid_argument("GlmmParams: vector too short");
  return {theta.head(theta.size() - 1), theta(theta.size() - 1)};
}

ClusteredData simulate_glmm(const ClusteredData& design, const GlmmParams& params,
                            RandomStream& stream) {
  if (params.beta.size() != design.X.cols())
    throw std::invalid_argument("simulate_glmm: dim(beta) != number of columns");
  if (!(params.sigma2 >= 0.0)) throw std::invalid_argument("simulate_glmm: sigma2 must be >= 0");
  const std::size_t m = design.clusters();
  std::vector<double> z(m);
  for (double& zi : z) zi = stream.normal();
  const double sigma = std::sqrt(params.sigma2);
  const Eigen::VectorXd eta = design.X * params.beta;

  ClusteredData out = design;
  out.y.resize(design.observations());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t r = design.offsets[i]; r < design.offsets[i + 1]; ++r) {
      const double mu = expit(eta(static_cast<Eigen::Index>(r)) + sigma * z[i]);
      out.y[r] = stream.uniform() <= mu ? 1 : 0;
    }
  }
  return out;
}

namespace {

double bernoulli_loglik(double y, double eta) { return y * eta - log1pexp(eta); }

// Posterior mode of the random intercept by Newton, safeguarded by bisection on
// the bracket [s2 (S - n_i), s2 S] that must contain the root of the derivative.
double cluster_mode(const Eigen::VectorXd& eta, const std::vector<double>& y, double s2,
                    double& curvature) {
  const double n_i = static_cast<double>(eta.size());
  double successes = 0.0;
  for (double v : y) successes += v;
  double lo = s2 * (successes - n_i);
  double hi = s2 * successes;
  double u = std::clamp(0.0, lo, hi);
  for (int it = 0; it < 200; ++it) {
    double g = -u / s2;
    double info = 1.0 / s2;
    for (Eigen::Index j = 0; j < eta.size(); ++j) {
      const double mu = expit(eta(j) + u);
      g += y[static_cast<std::size_t>(j)] - mu;
      info += mu * (1.0 - mu);
    }
    if (g == 0.0) break;
    if (g > 0.0) lo = u; else hi = u;
    double next = u + g / info;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool done = std::abs(next - u) <= 1e-14 * (1.0 + std::abs(u));
    u = next;
    if (done) break;
  }
  curvature = 1.0 / s2;
  for (Eigen::Index j = 0; j < eta.size(); ++j) {
    const double mu = expit(eta(j) + u);
    curvature += mu * (1.0 - mu);
  }
  return u;
}

}  // namespace

double cluster_log_integral(const ClusteredData& data, std::size_t cluster, const ParamVector& beta,
                            double sigma, const GaussHermiteRule& rule) {
  const auto first = static_cast<Eigen::Index>(data.offsets[cluster]);
  const auto size = static_cast<Eigen::Index>(data.cluster_size(cluster));
  const Eigen::VectorXd eta = data.X.middleRows(first, size) * beta;
  std::vector<double> y(static_cast<std::size_t>(size));
  for (Eigen::Index j = 0; j < size; ++j)
    y[static_cast<std::size_t>(j)] = data.y[static_cast<std::size_t>(first + j)];

  if (sigma == 0.0) {
    double ll = 0.0;
    for (Eigen::Index j = 0; j < size; ++j) ll += bernoulli_loglik(y[static_cast<std::size_t>(j)], eta(j));
    return ll;
  }

  const double s2 = sigma * sigma;
  double curvature = 0.0;
  const double mode = cluster_mode(eta, y, s2, curvature);
  const double scale = std::sqrt(2.0 / curvature);

  std::vector<double> terms(rule.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double u = mode + scale * rule.nodes[k];
    double f = -u * u / (2.0 * s2);
    for (Eigen::Index j = 0; j < size; ++j) f += bernoulli_loglik(y[static_cast<std::size_t>(j)], eta(j) + u);
    terms[k] = rule.log_weights_plus_square[k] + f;
    peak = std::max(peak, terms[k]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return std::log(scale) + peak + std::log(sum) - 0.5 * std::log(2.0 * std::numbers::pi * s2);
}

double marginal_loglik_ghq(const ClusteredData& data, const GlmmParams& params,
                           const GaussHermiteRule& rule) {
  if (rule.size() % 2 == 0) throw std::invalid_argument("marginal_loglik_ghq: K must be odd");
  if (data.y.size() != data.observations())
    throw std::invalid_argument("marginal_loglik_ghq: data has no responses");
  if (!(params.sigma2 >= 0.0)) throw std::invalid_argument("marginal_loglik_ghq: sigma2 < 0");
  const double sigma = std::sqrt(params.sigma2);
  const int m = static_cast<int>(data.clusters());
  std::vector<double> per_cluster(static_cast<std::size_t>(m));
  const bool go_parallel = m >= 64 && omp_in_parallel() == 0;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (int i = 0; i < m; ++i)
    per_cluster[static_cast<std::size_t>(i)] =
        cluster_log_integral(data, static_cast<std::size_t>(i), params.beta, sigma, rule);
  double total = 0.0;
  for (double v : per_cluster) total += v;
  return total;
}

double marginal_loglik_ghq(const ClusteredData& data, const GlmmParams& params, int K) {
  if (K < 1 || K % 2 == 0) throw std::invalid_argument("marginal_loglik_ghq: K must be odd and >= 1");
  return marginal_loglik_ghq(data, params, gauss_hermite(K));
}

GlmmFit fit_mle_ghq(const ClusteredData& data, const GlmmFitOptions& opts) {
  data.validate();
  if (data.y.empty()) throw std::invalid_argument("fit_mle_ghq: data has no responses");
  if (opts.ghq_nodes < 1 || opts.ghq_nodes % 2 == 0)
    throw std::invalid_argument("fit_mle_ghq: ghq_nodes must be odd");
  const Eigen::Index q = data.X.cols();

  GlmmFit fit;
  const FitResult pooled = fit_mle(data.X, to_real(data.y));
  if (!pooled.ok()) {
    fit.diverging = pooled.diverging;
    fit.params = {pooled.beta_hat, 0.0};
    return fit;
  }

  const GaussHermiteRule rule = gauss_hermite(opts.ghq_nodes);
  const Objective negloglik = [&](const Eigen::VectorXd& phi) {
    if (phi.head(q).lpNorm<Eigen::Infinity>() > opts.divergence_bound)
      return std::numeric_limits<double>::infinity();
    const double sigma2 = std::exp(2.0 * phi(q));
    return -marginal_loglik_ghq(data, {phi.head(q), sigma2}, rule);
  };
  Eigen::VectorXd start(q + 1);
  start << pooled.beta_hat, 0.5 * std::log(opts.initial_sigma2);
  const MinimizeResult res = minimize_bfgs(negloglik, start, opts.minimize);

  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.gradient_norm = res.gradient.size() ? res.gradient.lpNorm<Eigen::Infinity>() : 0.0;
  fit.params = {res.x.head(q), std::exp(2.0 * res.x(q))};
  fit.loglik = -res.value;

  const double log_sigma = res.x(q);
  if (log_sigma < opts.boundary_log_sigma) {
    fit.boundary = true;
  } else if (log_sigma < -4.0) {
    // The likelihood is flat in log sigma near zero; the optimiser stops before
    // the nominal boundary, so check whether sigma^2 = 0 is at least as good.
    const double at_zero = marginal_loglik_ghq(data, {fit.params.beta, 0.0}, rule);
    fit.boundary = at_zero >= fit.loglik - 1e-8;
  }
  if (fit.boundary) {
    fit.params.sigma2 = 0.0;
    fit.loglik = marginal_loglik_ghq(data, fit.params, rule);
  }
  if (!fit.converged && (fit.params.beta.lpNorm<Eigen::Infinity>() > 0.5 * opts.divergence_bound ||
                         fit.params.sigma2 > opts.sigma2_divergence_bound))
    fit.diverging = true;
  return fit;
}

namespace {

struct JointState {
  ParamVector beta;
  Eigen::VectorXd u;     // one random intercept per cluster
  Eigen::VectorXd info;  // sum_j w_ij + 1/sigma^2 at the mode
};

enum class InnerStatus { ok, diverging, failed };

// Newton on the penalised log-likelihood sum l(y; x beta + u_i) - sum u_i^2 / (2 s2)
// with the u-block eliminated through its diagonal Schur complement.
// s2 == 0 pins u at zero and reduces to pooled logistic Newton.
InnerStatus maximise_joint(const ClusteredData& data, const Eigen::VectorXd& y, double s2,
                           JointState& st, const GlmmFitOptions& opts) {
  const Eigen::Index q = data.X.cols();
  const std::size_t m = data.clusters();
  const bool free_u = s2 > 0.0;
  if (!free_u) st.u.setZero();

  Eigen::VectorXd eta(data.X.rows()), mu(data.X.rows());
  auto fill_eta = [&](const ParamVector& beta, const Eigen::VectorXd& u, Eigen::VectorXd& out) {
    out.noalias() = data.X * beta;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t r = data.offsets[i]; r < data.offsets[i + 1]; ++r)
        out(static_cast<Eigen::Index>(r)) += u(static_cast<Eigen::Index>(i));
  };
  auto objective = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& u) {
    double val = 0.0;
    for (Eigen::Index r = 0; r < e.size(); ++r) val += bernoulli_loglik(y(r), e(r));
    if (free_u) val -= u.squaredNorm() / (2.0 * s2);
    return val;
  };

  fill_eta(st.beta, st.u, eta);
  double current = objective(eta, st.u);
  Eigen::VectorXd g_beta(q), g_u(static_cast<Eigen::Index>(m));
  Eigen::MatrixXd A(q, q), B(q, static_cast<Eigen::Index>(m));
  Eigen::VectorXd D(static_cast<Eigen::Index>(m));
  Eigen::VectorXd eta_trial(data.X.rows());

  for (int iter = 0; iter < 200; ++iter) {
    mu = eta.unaryExpr([](double e) { return expit(e); });
    const Eigen::VectorXd resid = y - mu;
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    g_beta.noalias() = data.X.transpose() * resid;
    const Eigen::MatrixXd Xw = w.cwiseSqrt().asDiagonal() * data.X;
    A.noalias() = Xw.transpose() * Xw;
    for (std::size_t i = 0; i < m; ++i) {
      const auto first = static_cast<Eigen::Index>(data.offsets[i]);
      const auto size = static_cast<Eigen::Index>(data.cluster_size(i));
      const auto ii = static_cast<Eigen::Index>(i);
      B.col(ii).noalias() = data.X.middleRows(first, size).transpose() * w.segment(first, size);
      D(ii) = w.segment(first, size).sum() + (free_u ? 1.0 / s2 : 0.0);
      g_u(ii) = resid.segment(first, size).sum() - (free_u ? st.u(ii) / s2 : 0.0);
    }
    st.info = D;
    const double gnorm = std::max(g_beta.lpNorm<Eigen::Infinity>(),
                                  free_u ? g_u.lpNorm<Eigen::Infinity>() : 0.0);
    if (gnorm <= 1e-11 * (1.0 + static_cast<double>(y.size()))) return InnerStatus::ok;

    // Strict separation by the fixed effects alone: no finite maximiser.
    bool separated = true;
    const Eigen::VectorXd fixed = data.X * st.beta;
    for (Eigen::Index r = 0; r < y.size() && separated; ++r)
      separated = y(r) == 1.0 ? fixed(r) > 0.0 : fixed(r) < 0.0;
    if (separated) return InnerStatus::diverging;

    Eigen::MatrixXd S = A;
    Eigen::VectorXd rhs = g_beta;
    if (free_u) {
      S.noalias() -= B * D.cwiseInverse().asDiagonal() * B.transpose();
      rhs.noalias() -= B * g_u.cwiseQuotient(D);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return InnerStatus::failed;
    const Eigen::VectorXd d_beta = llt.solve(rhs);
    Eigen::VectorXd d_u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    if (free_u) d_u = (g_u - B.transpose() * d_beta).cwiseQuotient(D);
    if (!d_beta.allFinite() || !d_u.allFinite()) return InnerStatus::failed;

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      fill_eta(st.beta + t * d_beta, st.u + t * d_u, eta_trial);
      const double trial = objective(eta_trial, st.u + t * d_u);
      if (trial >= current - 1e-12 * (1.0 + std::abs(current))) {
        st.beta += t * d_beta;
        st.u += t * d_u;
        eta.swap(eta_trial);
        current = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) return InnerStatus::failed;
    if (st.beta.lpNorm<Eigen::Infinity>() > opts.divergence_bound) return InnerStatus::diverging;
  }
  return InnerStatus::failed;
}

}  // namespace

GlmmFit fit_joint_mode(const ClusteredData& data, const GlmmFitOptions& opts) {
  data.validate();
  if (data.y.empty()) throw std::invalid_argument("fit_joint_mode: data has no responses");
  const Eigen::Index q = data.X.cols();
  const auto m = static_cast<Eigen::Index>(data.clusters());
  const Eigen::VectorXd y = to_real(data.y);

  GlmmFit fit;
  JointState st{ParamVector::Zero(q), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};

  auto finish = [&](InnerStatus status, double s2) {
    fit.params = {st.beta, s2};
    fit.diverging = status == InnerStatus::diverging;
    fit.converged = status == InnerStatus::ok;
    return fit;
  };

  if (!opts.update_sigma2) {
    const double s2 = std::max(0.0, opts.initial_sigma2);
    fit.iterations = 1;
    fit.boundary = s2 == 0.0;
    return finish(maximise_joint(data, y, s2, st, opts), s2);
  }

  // The variance update s2 <- g(s2) = mean(u_i^2 + 1/info_i) is a scalar fixed-point
  // iteration; Steffensen extrapolation over pairs of updates speeds it up.
  InnerStatus status = InnerStatus::ok;
  auto update = [&](double s2) {
    status = maximise_joint(data, y, s2, st, opts);
    ++fit.iterations;
    double next = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) next += st.u(i) * st.u(i) + 1.0 / st.info(i);
    return next / static_cast<double>(m);
  };

  constexpr double kCollapse = 1e-8;
  double s0 = opts.initial_sigma2;
  while (fit.iterations < opts.max_alternations) {
    const double s1 = update(s0);
    if (status != InnerStatus::ok) return finish(status, s0);
    if (std::abs(s1 - s0) <= opts.tol * (1.0 + s0)) {
      if (s1 < kCollapse) break;
      (void)update(s1);
      if (status != InnerStatus::ok) return finish(status, s1);
      return finish(InnerStatus::ok, s1);
    }
    const double s2 = update(s1);
    if (status != InnerStatus::ok) return finish(status, s1);
    const double denom = s2 - 2.0 * s1 + s0;
    double next = s2;
    if (std::abs(denom) > 1e-300) {
      const double extrapolated = s0 - (s1 - s0) * (s1 - s0) / denom;
      if (std::isfinite(extrapolated) && extrapolated > 0.0) next = extrapolated;
    }
    if (next > opts.sigma2_divergence_bound) {
      fit.params = {st.beta, next};
      fit.diverging = true;
      return fit;
    }
    if (next < kCollapse) {
      s0 = next;
      break;
    }
    s0 = next;
  }
  if (s0 < kCollapse) {
    fit.boundary = true;
    st.u.setZero();
    return finish(maximise_joint(data, y, 0.0, st, opts), 0.0);
  }
  fit.params = {st.beta, s0};
  return fit;
}

std::string_view to_string(GlmmEstimatorKind kind) {
  return kind == GlmmEstimatorKind::joint_mode ? "joint_mode" : "ghq";
}

GlmmEstimatorKind parse_glmm_estimator(std::string_view name) {
  if (name == "joint_mode") return GlmmEstimatorKind::joint_mode;
  if (name == "ghq") return GlmmEstimatorKind::ghq;
  throw ConfigError("initial_estimator: expected 'joint_mode' or 'ghq', got '" +
                    std::string(name) + "'");
}

GlmmModel::GlmmModel(ClusteredData design, GlmmEstimatorKind kind, GlmmFitOptions opts)
    : design_(std::make_shared<const ClusteredData>(std::move(design))), kind_(kind), opts_(opts) {
  design_->validate();
}

GlmmModel::Dataset GlmmModel::simulate(const ParamVector& theta, RandomStream& stream) const {
  GlmmParams params = GlmmParams::from_vector(theta);
  params.sigma2 = std::max(0.0, params.sigma2);
  return simulate_glmm(*design_, params, stream).y;
}

GlmmFit GlmmModel::fit(const Dataset& data) const {
  ClusteredData full = *design_;
  full.y = data;
  return kind_ == GlmmEstimatorKind::joint_mode ? fit_joint_mode(full, opts_)
                                                : fit_mle_ghq(full, opts_);
}

std::optional<ParamVector> GlmmModel::estimate(const Dataset& data) const {
  const GlmmFit f = fit(data);
  if (!f.ok()) return std::nullopt;
  return f.params.to_vector();
}

}  // namespace obree
