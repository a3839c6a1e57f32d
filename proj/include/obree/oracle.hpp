#pragma once

// Closed-form self-checks on the toy models, shared by `obree oracle-check`
// and the test suite.

#include <string>
#include <vector>

namespace obree {

struct OracleCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Exact-pi fixed points for exp_rate and unif_max, and Monte Carlo means of the
/// toy estimators against their analytic expectations (1e4 samples when quick,
/// 1e5 otherwise; 4 standard errors).
std::vector<OracleCheck> run_oracle_checks(bool quick);

}  // namespace obree
