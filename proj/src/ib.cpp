#include "obree/ib.hpp"

#include "ib_detail.hpp"
#include "obree/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace obree {

DomainBounds DomainBounds::uniform(Eigen::Index p, double lower, double upper) {
  return {ParamVector::Constant(p, lower), ParamVector::Constant(p, upper)};
}

bool DomainBounds::contains(const ParamVector& theta) const {
  return theta.size() == lower.size() && (theta.array() >= lower.array()).all() &&
         (theta.array() <= upper.array()).all();
}

bool DomainBounds::strictly_contains(const ParamVector& theta) const {
  return theta.size() == lower.size() && (theta.array() > lower.array()).all() &&
         (theta.array() < upper.array()).all();
}

void DomainBounds::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("domain bounds: lower and upper must be non-empty and equal length");
  if (!lower.allFinite() || !upper.allFinite())
    throw std::invalid_argument("domain bounds must be finite");
  if (!(lower.array() < upper.array()).all())
    throw std::invalid_argument("domain bounds: lower < upper required componentwise");
}

std::string_view to_string(FailurePolicy policy) {
  switch (policy) {
    case FailurePolicy::drop: return "drop";
    case FailurePolicy::retry: return "retry";
    case FailurePolicy::abort: return "abort";
  }
  return "?";
}

FailurePolicy parse_failure_policy(std::string_view name) {
  if (name == "drop") return FailurePolicy::drop;
  if (name == "retry") return FailurePolicy::retry;
  if (name == "abort") return FailurePolicy::abort;
  throw ConfigError("failure_policy: expected one of drop, retry, abort; got '" +
                    std::string(name) + "'");
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::surrogate_failure: return "surrogate_failure";
  }
  return "?";
}

bool drifting(const IBResult& result, int window) {
  const auto k = static_cast<int>(result.iterates.size()) - 1;
  const int w = std::min(window, k);
  if (w < 3) return false;
  // Per coordinate: least-squares line through the last w + 1 iterates.
  const double npts = w + 1.0, tbar = w / 2.0;
  double stt = 0.0;
  for (int i = 0; i <= w; ++i) stt += (i - tbar) * (i - tbar);
  const ParamVector& last = result.iterates[static_cast<std::size_t>(k)];
  for (Eigen::Index j = 0; j < last.size(); ++j) {
    double ybar = 0.0;
    for (int i = 0; i <= w; ++i) ybar += result.iterates[static_cast<std::size_t>(k - w + i)](j);
    ybar /= npts;
    double sty = 0.0;
    for (int i = 0; i <= w; ++i) sty += (i - tbar) * (result.iterates[static_cast<std::size_t>(k - w + i)](j) - ybar);
    const double slope = sty / stt;
    double sse = 0.0;
    for (int i = 0; i <= w; ++i) {
      const double e = result.iterates[static_cast<std::size_t>(k - w + i)](j) - ybar - slope * (i - tbar);
      sse += e * e;
    }
    const double trend = std::abs(slope) * w;
    if (trend > 3.0 * std::sqrt(sse / (npts - 2.0)) && trend > 1e-12 * (1.0 + std::abs(last(j)))) return true;
  }
  return false;
}

void SimulationBudget::validate() const {
  if (H < 1) throw std::invalid_argument("budget: H must be >= 1");
  if (!(tol > 0.0) || !std::isfinite(tol)) throw std::invalid_argument("budget: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("budget: max_iter must be >= 1");
  if (max_retries < 0) throw std::invalid_argument("budget: max_retries must be >= 0");
}

Projection project_to_domain(const ParamVector& theta, const DomainBounds& bounds) {
  if (theta.size() != bounds.dimension())
    throw std::invalid_argument("project_to_domain: dimension mismatch");
  Projection out{theta.cwiseMax(bounds.lower).cwiseMin(bounds.upper), false};
  out.clamped = (out.theta.array() != theta.array()).any();
  return out;
}

ParamVector ib_step(const ParamVector& theta_k, const ParamVector& theta_tilde,
                    const ParamVector& pi_star_at_k) {
  if (theta_k.size() != theta_tilde.size() || theta_k.size() != pi_star_at_k.size())
    throw std::invalid_argument("ib_step: dimension mismatch");
  return theta_tilde - (pi_star_at_k - theta_k);
}

StreamKey replica_key(std::uint64_t seed, std::uint64_t rep_tag, std::uint64_t h) {
  return StreamKey{seed, {{TagLabel::rep, rep_tag}, {TagLabel::sim, h}}};
}

SurrogateResult surrogate_pi(const SimulableModel& model, const ParamVector& theta,
                             const SimulationBudget& budget, std::uint64_t rep_tag) {
  if (budget.use_exact_pi) return {detail::exact_pi_or_throw(model, theta), 0};

  const int H = budget.H;
  std::vector<detail::ReplicaOutcome> outcomes(static_cast<std::size_t>(H));
  const bool go_parallel = H > 1 && omp_in_parallel() == 0;
#pragma omp parallel for schedule(dynamic) if (go_parallel)
  for (int h = 0; h < H; ++h)
    outcomes[static_cast<std::size_t>(h)] =
        detail::run_replica(model, theta, budget, rep_tag, static_cast<std::uint64_t>(h));
  return detail::reduce_replicas(outcomes, model.dimension(), budget.failure_policy);
}

IBResult solve_fixed_point(const SimulableModel& model, const ParamVector& theta_tilde,
                           const SimulationBudget& budget, const DomainBounds& bounds,
                           std::uint64_t rep_tag) {
  return detail::solve_with(
      [&](const ParamVector& theta) { return surrogate_pi(model, theta, budget, rep_tag); },
      theta_tilde, budget, bounds);
}

}  // namespace obree
