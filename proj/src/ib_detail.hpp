#pragma once

#include "obree/ib.hpp"

#include <stdexcept>
#include <utility>

namespace obree::detail {

struct ReplicaOutcome {
  std::optional<ParamVector> estimate;
  int failures = 0;
};

// One replica under the configured failure policy. Retries walk substreams
// h + H, h + 2H, ... which no other replica of the same replication uses.
inline ReplicaOutcome run_replica(const SimulableModel& model, const ParamVector& theta,
                                  const SimulationBudget& budget, std::uint64_t rep_tag,
                                  std::uint64_t h) {
  ReplicaOutcome out;
  const int attempts = budget.failure_policy == FailurePolicy::retry ? budget.max_retries + 1 : 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const std::uint64_t substream = h + static_cast<std::uint64_t>(attempt) * budget.H;
    out.estimate = model.replica_estimate(theta, replica_key(budget.seed, rep_tag, substream));
    if (out.estimate) return out;
    ++out.failures;
  }
  return out;
}

inline std::optional<ParamVector> exact_pi_or_throw(const SimulableModel& model,
                                                     const ParamVector& theta) {
  auto pi = model.exact_pi(theta);
  if (!pi) throw std::invalid_argument("use_exact_pi requested but the model has no exact_pi");
  return pi;
}

// Averages outcomes in h order. Shared by the serial and OpenMP paths so both
// perform the identical floating-point reduction.
template <class OutcomeRange>
SurrogateResult reduce_replicas(const OutcomeRange& outcomes, Eigen::Index p,
                                FailurePolicy policy) {
  SurrogateResult result;
  ParamVector sum = ParamVector::Zero(p);
  int used = 0;
  for (const ReplicaOutcome& o : outcomes) {
    result.failed_replicas += o.failures;
    if (o.estimate) {
      sum += *o.estimate;
      ++used;
    }
  }
  if (used == 0 || (policy == FailurePolicy::abort && result.failed_replicas > 0)) return result;
  result.value = sum / static_cast<double>(used);
  return result;
}

template <class Surrogate>
IBResult solve_with(Surrogate&& surrogate, const ParamVector& theta_tilde,
                    const SimulationBudget& budget, const DomainBounds& bounds) {
  budget.validate();
  bounds.validate();
  if (theta_tilde.size() != bounds.dimension())
    throw std::invalid_argument("theta_tilde and bounds differ in dimension");

  IBResult result;
  ParamVector theta = project_to_domain(theta_tilde, bounds).theta;
  result.iterates.push_back(theta);
  for (int k = 0; k < budget.max_iter; ++k) {
    SurrogateResult pi = surrogate(theta);
    result.failures += pi.failed_replicas;
    if (!pi.value) {
      result.status = SolveStatus::surrogate_failure;
      result.theta_hat = theta;
      return result;
    }
    ParamVector next = project_to_domain(ib_step(theta, theta_tilde, *pi.value), bounds).theta;
    const double displacement = (next - theta).lpNorm<Eigen::Infinity>();
    const double residual = displacement / (1.0 + next.lpNorm<Eigen::Infinity>());
    result.residuals.push_back(residual);
    result.iterates.push_back(next);
    result.iterations = k + 1;
    theta = std::move(next);
    if (residual <= budget.tol) {
      result.status = SolveStatus::converged;
      break;
    }
  }
  result.theta_hat = theta;
  return result;
}

}  // namespace obree::detail
