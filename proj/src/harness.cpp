#include "obree/harness.hpp"

#include "obree/logistic_model.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace obree {

double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SummaryStats summarize(const Eigen::MatrixXd& estimates, const ParamVector& theta0) {
  const Eigen::Index R = estimates.rows(), p = theta0.size();
  if (R > 0 && estimates.cols() != p) throw std::invalid_argument("summarize: dimension mismatch");
  SummaryStats s;
  s.n_ok = static_cast<int>(R);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.bias = s.se_bias = s.rmse = ParamVector::Constant(p, nan);
  for (auto& q : s.quantiles) q = ParamVector::Constant(p, nan);
  if (R == 0) return s;

  const ParamVector mean = estimates.colwise().mean().transpose();
  s.bias = mean - theta0;
  const Eigen::MatrixXd centred = estimates.rowwise() - mean.transpose();
  const Eigen::MatrixXd errors = estimates.rowwise() - theta0.transpose();
  s.rmse = (errors.array().square().colwise().sum() / static_cast<double>(R)).sqrt().transpose();
  if (R > 1) {
    const ParamVector var =
        (centred.array().square().colwise().sum() / static_cast<double>(R - 1)).transpose();
    s.variance = var;
    s.se_bias = (var.array() / static_cast<double>(R)).sqrt();
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> column(estimates.col(j).data(), estimates.col(j).data() + R);
    for (std::size_t k = 0; k < kSummaryQuantiles.size(); ++k)
      s.quantiles[k](j) = quantile_type7(column, kSummaryQuantiles[k]);
  }
  return s;
}

const EstimatorRun& ExperimentReport::run(EstimatorId id) const {
  for (const EstimatorRun& r : runs)
    if (r.id == id) return r;
  throw std::out_of_range("report has no run for estimator " + std::string(to_string(id)));
}

void summarize_runs(ExperimentReport& report) {
  const ParamVector& theta0 = report.config.theta0;
  for (EstimatorRun& run : report.runs) {
    int ok = 0, failures = 0;
    for (const EstimateRecord& rec : run.records) {
      ok += rec.value ? 1 : 0;
      failures += rec.status == "ok" || rec.status == "converged" ? 0 : 1;
    }
    Eigen::MatrixXd est(ok, theta0.size());
    int row = 0, replica_failures = 0;
    for (const EstimateRecord& rec : run.records) {
      replica_failures += rec.replica_failures;
      if (rec.value) est.row(row++) = rec.value->transpose();
    }
    run.summary = summarize(est, theta0);
    run.summary.convergence_failures = failures;
    run.summary.replica_failures = replica_failures;
  }
}

namespace {

StreamKey data_key(std::uint64_t seed, std::uint64_t rep) {
  return StreamKey{seed, {{TagLabel::rep, rep}}};
}

StreamKey design_key(std::uint64_t seed) { return StreamKey{seed, {{TagLabel::unit, 0}}}; }

EstimateRecord direct(std::optional<ParamVector> value, int iterations) {
  EstimateRecord rec;
  rec.status = value ? "ok" : "failed";
  rec.value = std::move(value);
  rec.iterations = iterations;
  return rec;
}

EstimateRecord obree(const SimulableModel& model, const std::optional<ParamVector>& initial,
                     const ExperimentConfig& config, std::uint64_t rep_tag) {
  EstimateRecord rec;
  if (!initial) {
    rec.status = "initial_failure";
    return rec;
  }
  const IBResult ib = solve_fixed_point(model, *initial, config.budget, config.bounds, rep_tag);
  rec.status = std::string(to_string(ib.status));
  rec.iterations = ib.iterations;
  rec.replica_failures = ib.failures;
  if (!ib.residuals.empty()) rec.residual = ib.residuals.back();
  if (ib.converged()) {
    rec.value = ib.theta_hat;
  } else if (config.keep_unconverged && ib.status == SolveStatus::max_iterations) {
    // A stall or cycle of a piecewise-constant pi* is kept; a run still travelling is not.
    if (drifting(ib)) rec.status = "drifting";
    else rec.value = ib.theta_hat;
  }
  return rec;
}

LogisticEstimator logistic_estimator(const ExperimentConfig& c, EstimatorId id) {
  LogisticEstimator e;
  if (id == EstimatorId::robust || id == EstimatorId::obree_r) {
    e.kind = LogisticEstimator::Kind::robust;
    e.tuning.c = c.huber_c;
    e.delta = id == EstimatorId::obree_r ? c.delta : 0.0;
  }
  return e;
}

GlmmFitOptions glmm_options(const ExperimentConfig& c) {
  GlmmFitOptions o;
  o.ghq_nodes = c.ghq_nodes;
  return o;
}

}  // namespace

DesignMatrix experiment_logistic_design(const ExperimentConfig& c) {
  return generate_design(c.n, c.p, c.covariate_mean, design_key(c.budget.seed), c.covariate_scale);
}

ClusteredData experiment_glmm_design(const ExperimentConfig& c) {
  return make_glmm_design(c.m, c.cluster_size, c.q, c.covariate_mean, design_key(c.budget.seed),
                          c.covariate_scale);
}

EstimateRecord estimate_toy(const ExperimentConfig& c, EstimatorId id,
                            const std::vector<double>& sample, std::uint64_t rep_tag) {
  const ToyModel model(c.toy, sample.size());
  std::optional<ParamVector> initial = model.estimate(sample);
  if (id == EstimatorId::mle) return direct(std::move(initial), 0);
  if (id == EstimatorId::obree_mle) return obree(model, initial, c, rep_tag);
  throw std::invalid_argument("estimator not available for toy models");
}

EstimateRecord estimate_logistic(const ExperimentConfig& c, EstimatorId id, const DesignMatrix& X,
                                 const BinaryResponses& y, std::uint64_t rep_tag) {
  const LogisticModel model(X, logistic_estimator(c, id));
  const FitResult fit = model.fit(y);
  std::optional<ParamVector> initial;
  if (fit.ok()) initial = fit.beta_hat;
  if (id == EstimatorId::mle || id == EstimatorId::robust)
    return direct(std::move(initial), fit.iterations);
  if (id == EstimatorId::obree_mle || id == EstimatorId::obree_r)
    return obree(model, initial, c, rep_tag);
  throw std::invalid_argument("estimator not available for the logistic model");
}

EstimateRecord estimate_glmm(const ExperimentConfig& c, EstimatorId id, const ClusteredData& design,
                             const BinaryResponses& y, std::uint64_t rep_tag) {
  GlmmEstimatorKind kind = c.initial_estimator;
  if (id == EstimatorId::ghq) kind = GlmmEstimatorKind::ghq;
  else if (id == EstimatorId::joint_mode) kind = GlmmEstimatorKind::joint_mode;
  else if (id != EstimatorId::obree_glmm)
    throw std::invalid_argument("estimator not available for the GLMM");
  const GlmmModel model(design, kind, glmm_options(c));
  const GlmmFit fit = model.fit(y);
  std::optional<ParamVector> initial;
  if (fit.ok()) initial = fit.params.to_vector();
  if (id == EstimatorId::obree_glmm) return obree(model, initial, c, rep_tag);
  return direct(std::move(initial), fit.iterations);
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.budget.validate();
  if (config.estimators.empty()) throw std::invalid_argument("run_experiment: no estimators");
  if (config.R < 1) throw std::invalid_argument("run_experiment: R must be >= 1");

  ExperimentReport report;
  report.config = config;
  const auto R = static_cast<std::size_t>(config.R);
  for (EstimatorId id : config.estimators)
    report.runs.push_back({id, std::vector<EstimateRecord>(R), {}});

  DesignMatrix X;
  ClusteredData glmm_design;
  if (config.kind == ModelKind::logistic) X = experiment_logistic_design(config);
  if (config.kind == ModelKind::glmm) glmm_design = experiment_glmm_design(config);

  const std::uint64_t seed = config.budget.seed;
  const ParamVector& theta0 = config.theta0;

  // Replications are independent and keyed by r, so scheduling cannot change results.
#pragma omp parallel for schedule(dynamic) if (config.R > 1)
  for (int r = 1; r <= config.R; ++r) {
    const auto rep = static_cast<std::uint64_t>(r);
    RandomStream stream = derive_stream(data_key(seed, rep));
    const auto slot = static_cast<std::size_t>(r - 1);
    switch (config.kind) {
      case ModelKind::toy: {
        const std::vector<double> sample = toy_simulate(config.toy, theta0(0), config.n, stream);
        for (EstimatorRun& run : report.runs)
          run.records[slot] = estimate_toy(config, run.id, sample, rep);
        break;
      }
      case ModelKind::logistic: {
        BinaryResponses y = simulate_responses(X, theta0, stream);
        if (config.contamination_rate > 0.0) {
          Eigen::VectorXd mu = fitted_means(X, theta0);
          if (config.contamination_ranking == ContaminationRanking::fitted_means) {
            const FitResult pre = fit_mle(X, to_real(y));
            if (pre.ok()) mu = fitted_means(X, pre.beta_hat);
          }
          y = contaminate(y, std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())),
                          config.contamination_rate);
        }
        for (EstimatorRun& run : report.runs)
          run.records[slot] = estimate_logistic(config, run.id, X, y, rep);
        break;
      }
      case ModelKind::glmm: {
        const BinaryResponses y =
            simulate_glmm(glmm_design, GlmmParams::from_vector(theta0), stream).y;
        for (EstimatorRun& run : report.runs)
          run.records[slot] = estimate_glmm(config, run.id, glmm_design, y, rep);
        break;
      }
    }
  }

  summarize_runs(report);
  return report;
}

}  // namespace obree
