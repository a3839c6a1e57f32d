#pragma once

// Experiment configuration: a flat JSON object, validated with every default
// filled in. export_config writes the resolved form, which parses back to the
// same configuration.

#include "obree/glmm.hpp"
#include "obree/ib.hpp"
#include "obree/toy_models.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace obree {

enum class ModelKind { toy, logistic, glmm };

enum class EstimatorId { mle, robust, obree_mle, obree_r, ghq, joint_mode, obree_glmm };

std::string_view to_string(EstimatorId id);
EstimatorId parse_estimator_id(std::string_view name);
bool is_obree(EstimatorId id);

enum class ScalePreset { desk, paper };

/// Which means rank observations for contamination.
enum class ContaminationRanking { true_means, fitted_means };

struct ExperimentConfig {
  ModelKind kind = ModelKind::toy;
  ToyModelId toy = ToyModelId::exp_rate;
  std::vector<EstimatorId> estimators;
  int R = 1;
  SimulationBudget budget{};
  std::string setting = "default";
  ScalePreset scale = ScalePreset::desk;
  int design_setting = 1;
  DomainBounds bounds;
  /// Report the last IB iterate when the solver stops at max_iter. Responses that
  /// are discrete make pi* piecewise constant, so the residual can stall above tol.
  bool keep_unconverged = false;

  // toy and logistic
  std::size_t n = 0;
  // toy: (theta); logistic: beta; glmm: (beta_0, ..., beta_q, sigma^2)
  ParamVector theta0;

  // logistic
  std::size_t p = 0;
  double covariate_mean = 0.0;
  CovariateScale covariate_scale = CovariateScale::variance;
  double contamination_rate = 0.0;
  ContaminationRanking contamination_ranking = ContaminationRanking::true_means;
  double huber_c = 1.345;
  double delta = 0.01;

  // glmm
  std::size_t m = 0;
  std::size_t cluster_size = 0;
  std::size_t q = 0;  ///< slopes; the intercept beta_0 comes on top
  int ghq_nodes = 31;
  GlmmEstimatorKind initial_estimator = GlmmEstimatorKind::joint_mode;

  std::string model_name() const;
  std::vector<std::string> component_names() const;
};

/// Throws ConfigError naming the key path on any schema violation.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(std::string_view text);
/// Accepts either a plain config or a manifest {"obree_manifest": 1, "config": {...}}.
ExperimentConfig load_config_file(const std::string& path);

nlohmann::json export_config(const ExperimentConfig& config);

}  // namespace obree
