#pragma once

#include "obree/logistic.hpp"
#include "obree/robust_logistic.hpp"

#include <memory>

namespace obree {

/// Which initial estimator the logistic model applies to a response vector.
struct LogisticEstimator {
  enum class Kind { mle, robust } kind = Kind::mle;
  HuberTuning tuning{};
  /// Pseudo-value shrinkage applied before fitting; 0 keeps the binary responses.
  double delta = 0.0;
  bool leverage_weighting = true;
};

/// Logistic regression on a fixed design. Leverage weights are computed once
/// since X does not change between replicas.
class LogisticModel final : public ModelBase<BinaryResponses> {
 public:
  LogisticModel(DesignMatrix X, LogisticEstimator estimator);

  Eigen::Index dimension() const override { return X_->cols(); }
  std::size_t sample_size() const override { return static_cast<std::size_t>(X_->rows()); }

  const DesignMatrix& design() const { return *X_; }
  const LogisticEstimator& estimator() const { return estimator_; }

  Dataset simulate(const ParamVector& theta, RandomStream& stream) const override;
  std::optional<ParamVector> estimate(const Dataset& data) const override;
  FitResult fit(const Dataset& data) const;

 private:
  std::shared_ptr<const DesignMatrix> X_;
  LogisticEstimator estimator_;
  Eigen::VectorXd weights_;
};

}  // namespace obree
