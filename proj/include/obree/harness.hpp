#pragma once

// Monte Carlo experiment runner: R replications of simulate -> (contaminate) ->
// estimate for every configured estimator, plus per-component summaries.

#include "obree/config.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace obree {

/// One estimator applied to one replication.
struct EstimateRecord {
  std::optional<ParamVector> value;  ///< empty when the estimator failed
  std::string status;                ///< "ok", "failed", or a SolveStatus / "initial_failure"
  int iterations = 0;
  int replica_failures = 0;
  std::optional<double> residual;    ///< final fixed-point residual, OBREE rows only
};

inline constexpr std::array<double, 5> kSummaryQuantiles{0.05, 0.25, 0.50, 0.75, 0.95};

struct SummaryStats {
  int n_ok = 0;
  Eigen::VectorXd bias, se_bias, rmse;
  std::optional<Eigen::VectorXd> variance;  ///< 1/(R-1) normalisation; absent for R = 1
  std::array<Eigen::VectorXd, 5> quantiles;   ///< type-7, at kSummaryQuantiles
  int convergence_failures = 0;  ///< records that failed or stopped unconverged
  int replica_failures = 0;
};

/// bias = mean - theta0, se_bias = sqrt(variance / R), RMSE = sqrt(mean squared error).
/// Rows of `estimates` are replications. R = 0 gives NaN statistics.
SummaryStats summarize(const Eigen::MatrixXd& estimates, const ParamVector& theta0);

/// Type-7 sample quantile (linear interpolation between order statistics).
double quantile_type7(std::vector<double> values, double prob);

struct EstimatorRun {
  EstimatorId id;
  std::vector<EstimateRecord> records;  ///< index r-1 holds replication r
  SummaryStats summary;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<EstimatorRun> runs;

  const EstimatorRun& run(EstimatorId id) const;
};

/// Recomputes every run's summary from its records.
void summarize_runs(ExperimentReport& report);

ExperimentReport run_experiment(const ExperimentConfig& config);

/// Fixed design shared by all replications: logistic X, or the GLMM clustered design.
DesignMatrix experiment_logistic_design(const ExperimentConfig& config);
ClusteredData experiment_glmm_design(const ExperimentConfig& config);

/// Applies one estimator to an observed dataset. OBREE variants use rep_tag to
/// scope their replica streams. Toy data is the sample; logistic and GLMM data
/// is the response vector on the given design.
EstimateRecord estimate_toy(const ExperimentConfig& config, EstimatorId id,
                            const std::vector<double>& sample, std::uint64_t rep_tag);
EstimateRecord estimate_logistic(const ExperimentConfig& config, EstimatorId id,
                                 const DesignMatrix& X, const BinaryResponses& y,
                                 std::uint64_t rep_tag);
EstimateRecord estimate_glmm(const ExperimentConfig& config, EstimatorId id,
                             const ClusteredData& design, const BinaryResponses& y,
                             std::uint64_t rep_tag);

}  // namespace obree
