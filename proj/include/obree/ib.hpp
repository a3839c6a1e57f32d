#pragma once

// Iterative bootstrap: the simulated expectation pi*(theta, n), the map
// T(theta) = theta_tilde - (pi*(theta) - theta), and its fixed point.

#include "obree/model.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace obree {

/// What to do with a replica whose estimate fails.
enum class FailurePolicy {
  drop,   ///< leave it out of the H-average and count it
  retry,  ///< redraw on the next unused substream, up to max_retries times
  abort,  ///< the whole surrogate evaluation fails
};

std::string_view to_string(FailurePolicy policy);
FailurePolicy parse_failure_policy(std::string_view name);

struct SimulationBudget {
  int H = 1;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int max_iter = 50;
  bool use_exact_pi = false;
  FailurePolicy failure_policy = FailurePolicy::drop;
  int max_retries = 10;

  void validate() const;
};

struct SurrogateResult {
  std::optional<ParamVector> value;  ///< empty when no replica survived
  int failed_replicas = 0;
};

enum class SolveStatus { converged, max_iterations, surrogate_failure };

std::string_view to_string(SolveStatus status);

struct IBResult {
  ParamVector theta_hat;
  std::vector<ParamVector> iterates;  ///< theta^(0) ... theta^(k)
  /// Relative displacement ||theta^(k+1) - theta^(k)||_inf / (1 + ||theta^(k+1)||_inf).
  std::vector<double> residuals;
  SolveStatus status = SolveStatus::max_iterations;
  int iterations = 0;
  int failures = 0;  ///< failed replicas summed over all surrogate evaluations

  bool converged() const { return status == SolveStatus::converged; }
};

/// True when the last `window` steps of an unconverged run travel rather than
/// oscillate: for some coordinate, the least-squares trend over the window moves
/// more than 3 residual standard deviations. A stall, a 2-cycle or a bounded wander
/// is not drifting; a run chasing a fixed point that does not exist (theta-tilde
/// outside the range of pi) is.
bool drifting(const IBResult& result, int window = 20);

struct Projection {
  ParamVector theta;
  bool clamped = false;
};

Projection project_to_domain(const ParamVector& theta, const DomainBounds& bounds);

/// T(theta_k) before projection. Satisfies result + pi_star_at_k - theta_k == theta_tilde.
ParamVector ib_step(const ParamVector& theta_k, const ParamVector& theta_tilde,
                    const ParamVector& pi_star_at_k);

/// Stream key of replica h (0-based) inside replication rep_tag.
StreamKey replica_key(std::uint64_t seed, std::uint64_t rep_tag, std::uint64_t h);

/// pi*(theta, n): the average of H replica estimates on common random numbers.
/// Replicas run on the OpenMP team when called outside a parallel region; the
/// reduction is always in h order so the result does not depend on scheduling.
SurrogateResult surrogate_pi(const SimulableModel& model, const ParamVector& theta,
                             const SimulationBudget& budget, std::uint64_t rep_tag);

IBResult solve_fixed_point(const SimulableModel& model, const ParamVector& theta_tilde,
                           const SimulationBudget& budget, const DomainBounds& bounds,
                           std::uint64_t rep_tag = 0);

}  // namespace obree
