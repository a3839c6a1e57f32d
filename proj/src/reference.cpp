#include "obree/reference.hpp"

#include "ib_detail.hpp"

#include <cmath>
#include <stdexcept>

namespace obree::reference {

SurrogateResult surrogate_pi(const SimulableModel& model, const ParamVector& theta,
                             const SimulationBudget& budget, std::uint64_t rep_tag) {
  if (budget.use_exact_pi) return {detail::exact_pi_or_throw(model, theta), 0};
  std::vector<detail::ReplicaOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(budget.H));
  for (int h = 0; h < budget.H; ++h)
    outcomes.push_back(
        detail::run_replica(model, theta, budget, rep_tag, static_cast<std::uint64_t>(h)));
  return detail::reduce_replicas(outcomes, model.dimension(), budget.failure_policy);
}

IBResult solve_fixed_point(const SimulableModel& model, const ParamVector& theta_tilde,
                           const SimulationBudget& budget, const DomainBounds& bounds,
                           std::uint64_t rep_tag) {
  return detail::solve_with(
      [&](const ParamVector& theta) { return reference::surrogate_pi(model, theta, budget, rep_tag); },
      theta_tilde, budget, bounds);
}

double marginal_loglik_ghq(const ClusteredData& data, const GlmmParams& params,
                           const GaussHermiteRule& rule) {
  if (rule.size() % 2 == 0) throw std::invalid_argument("marginal_loglik_ghq: K must be odd");
  if (data.y.size() != data.observations())
    throw std::invalid_argument("marginal_loglik_ghq: data has no responses");
  const double sigma = std::sqrt(params.sigma2);
  double total = 0.0;
  for (std::size_t i = 0; i < data.clusters(); ++i)
    total += cluster_log_integral(data, i, params.beta, sigma, rule);
  return total;
}

}  // namespace obree::reference
