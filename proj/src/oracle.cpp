#include "obree/oracle.hpp"

#include "obree/ib.hpp"
#include "obree/toy_models.hpp"

#include <cmath>
#include <cstdio>

namespace obree {

namespace {

std::string describe(const char* fmt, double a, double b, double c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

}  // namespace

std::vector<OracleCheck> run_oracle_checks(bool quick) {
  std::vector<OracleCheck> checks;

  struct FixedPointCase {
    ToyModelId id;
    std::size_t n;
  };
  const FixedPointCase fixed[] = {{ToyModelId::exp_rate, 5},  {ToyModelId::exp_rate, 10},
                                  {ToyModelId::exp_rate, 50}, {ToyModelId::unif_max, 4},
                                  {ToyModelId::unif_max, 9},  {ToyModelId::unif_max, 100}};
  for (const auto& c : fixed) {
    const ToyModel model(c.id, c.n);
    const double n = static_cast<double>(c.n);
    const double theta_tilde = 1.7;
    const double expected =
        c.id == ToyModelId::exp_rate ? theta_tilde * (n - 1.0) / n : theta_tilde * (n + 1.0) / n;
    SimulationBudget budget;
    budget.use_exact_pi = true;
    const IBResult ib = solve_fixed_point(model, ParamVector::Constant(1, theta_tilde), budget,
                                          DomainBounds::uniform(1, 1e-6, 1e6));
    const double err = std::abs(ib.theta_hat(0) - expected);
    checks.push_back({"fixed_point " + std::string(to_string(c.id)) + " n=" + std::to_string(c.n),
                      ib.converged() && err <= 1e-8 && ib.iterations <= 15,
                      describe("theta_hat=%.12g expected=%.12g iterations=%g", ib.theta_hat(0),
                               expected, ib.iterations)});
  }

  struct MeanCase {
    ToyModelId id;
    double theta;
    std::size_t n;
  };
  const MeanCase means[] = {{ToyModelId::normal_mean, 0.7, 5}, {ToyModelId::exp_rate, 1.0, 10},
                            {ToyModelId::exp_rate, 2.5, 4},   {ToyModelId::unif_max, 2.0, 4},
                            {ToyModelId::unif_max, 0.5, 20}};
  const int draws = quick ? 10000 : 100000;
  for (const auto& c : means) {
    double sum = 0.0, sum_sq = 0.0;
    for (int d = 0; d < draws; ++d) {
      RandomStream stream = derive_stream(StreamKey{2024, {{TagLabel::obs, static_cast<std::uint64_t>(d)}}});
      const auto est = toy_estimate(c.id, toy_simulate(c.id, c.theta, c.n, stream));
      sum += *est;
      sum_sq += *est * *est;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum_sq / draws - mean * mean) / (draws - 1.0));
    const double exact = toy_exact_pi(c.id, c.theta, c.n);
    checks.push_back({"monte_carlo_mean " + std::string(to_string(c.id)) +
                          " n=" + std::to_string(c.n),
                      std::abs(mean - exact) <= 4.0 * se,
                      describe("mean=%.6g exact=%.6g se=%.3g", mean, exact, se)});
  }
  return checks;
}

}  // namespace obree
