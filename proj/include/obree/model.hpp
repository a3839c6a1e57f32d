#pragma once

#include "obree/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>

namespace obree {

using ParamVector = Eigen::VectorXd;

/// Componentwise box [lower, upper] standing in for the compact parameter set.
struct DomainBounds {
  ParamVector lower;
  ParamVector upper;

  /// Box with the same scalar limits in every component.
  static DomainBounds uniform(Eigen::Index p, double lower, double upper);

  Eigen::Index dimension() const { return lower.size(); }
  bool contains(const ParamVector& theta) const;
  bool strictly_contains(const ParamVector& theta) const;

  /// Throws std::invalid_argument unless lower < upper componentwise and finite.
  void validate() const;
};

/// The simulate/estimate contract every model plugged into the solver satisfies.
/// Implementations are immutable after construction and safe to call concurrently.
class SimulableModel {
 public:
  virtual ~SimulableModel() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual std::size_t sample_size() const = 0;

  /// Estimate computed on a sample simulated at theta from the stream named by key.
  /// An empty result means the estimator failed on that sample (e.g. separation).
  virtual std::optional<ParamVector> replica_estimate(const ParamVector& theta,
                                                      const StreamKey& key) const = 0;

  /// Closed-form expectation of the estimator, when the model knows it.
  virtual std::optional<ParamVector> exact_pi(const ParamVector& /*theta*/) const {
    return std::nullopt;
  }
};

/// Splits replica_estimate into the typed simulate and estimate steps.
template <class DatasetT>
class ModelBase : public SimulableModel {
 public:
  using Dataset = DatasetT;

  virtual Dataset simulate(const ParamVector& theta, RandomStream& stream) const = 0;
  virtual std::optional<ParamVector> estimate(const Dataset& data) const = 0;

  std::optional<ParamVector> replica_estimate(const ParamVector& theta,
                                              const StreamKey& key) const final {
    RandomStream stream = derive_stream(key);
    return estimate(simulate(theta, stream));
  }
};

}  // namespace obree
