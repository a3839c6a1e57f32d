#pragma once

// Scalar models with closed-form estimator expectations, used as oracles.
//   normal_mean: X ~ N(theta, 1),  estimator = mean,      pi = theta
//   exp_rate:    X ~ Exp(theta),   estimator = n / sum X, pi = theta n / (n - 1)
//   unif_max:    X ~ U(0, theta),  estimator = max X,     pi = theta n / (n + 1)

#include "obree/model.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace obree {

enum class ToyModelId { normal_mean, exp_rate, unif_max };

std::string_view to_string(ToyModelId id);
ToyModelId parse_toy_model_id(std::string_view name);

/// Maps base draws (uniforms, or standard normals for normal_mean) to a sample.
std::vector<double> toy_transform(ToyModelId id, double theta, std::span<const double> draws);

std::vector<double> toy_simulate(ToyModelId id, double theta, std::size_t n, RandomStream& stream);

/// Empty when the estimator is undefined on the sample (e.g. sum <= 0 for exp_rate).
/// Throws std::invalid_argument on an empty sample.
std::optional<double> toy_estimate(ToyModelId id, std::span<const double> sample);

double toy_exact_pi(ToyModelId id, double theta, std::size_t n);

class ToyModel final : public ModelBase<std::vector<double>> {
 public:
  ToyModel(ToyModelId id, std::size_t n);

  Eigen::Index dimension() const override { return 1; }
  std::size_t sample_size() const override { return n_; }
  ToyModelId id() const { return id_; }

  Dataset simulate(const ParamVector& theta, RandomStream& stream) const override;
  std::optional<ParamVector> estimate(const Dataset& data) const override;
  std::optional<ParamVector> exact_pi(const ParamVector& theta) const override;

 private:
  ToyModelId id_;
  std::size_t n_;
};

}  // namespace obree
