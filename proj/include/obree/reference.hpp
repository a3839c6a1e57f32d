#pragma once

// Serial reference implementations of the OpenMP kernels. They define the
// expected output bit for bit and exist for tests and benchmarks.

#include "obree/glmm.hpp"
#include "obree/ib.hpp"

namespace obree::reference {

SurrogateResult surrogate_pi(const SimulableModel& model, const ParamVector& theta,
                             const SimulationBudget& budget, std::uint64_t rep_tag);

IBResult solve_fixed_point(const SimulableModel& model, const ParamVector& theta_tilde,
                           const SimulationBudget& budget, const DomainBounds& bounds,
                           std::uint64_t rep_tag = 0);

double marginal_loglik_ghq(const ClusteredData& data, const GlmmParams& params,
                           const GaussHermiteRule& rule);

}  // namespace obree::reference
