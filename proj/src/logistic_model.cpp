#include "obree/logistic_model.hpp"

#include <stdexcept>

namespace obree {

LogisticModel::LogisticModel(DesignMatrix X, LogisticEstimator estimator)
    : X_(std::make_shared<const DesignMatrix>(std::move(X))), estimator_(estimator) {
  if (X_->rows() < X_->cols()) throw std::invalid_argument("LogisticModel: need n >= p");
  if (estimator_.kind == LogisticEstimator::Kind::robust) {
    weights_ = estimator_.leverage_weighting ? leverage_weights(*X_)
                                             : Eigen::VectorXd::Ones(X_->rows());
  }
}

LogisticModel::Dataset LogisticModel::simulate(const ParamVector& theta,
                                               RandomStream& stream) const {
  return simulate_responses(*X_, theta, stream);
}

FitResult LogisticModel::fit(const Dataset& data) const {
  const Eigen::VectorXd y = estimator_.delta > 0.0 ? pseudo_values(data, estimator_.delta).values
                                                    : to_real(data);
  if (estimator_.kind == LogisticEstimator::Kind::mle) return fit_mle(*X_, y);
  return fit_robust(*X_, y, estimator_.tuning, weights_);
}

std::optional<ParamVector> LogisticModel::estimate(const Dataset& data) const {
  FitResult f = fit(data);
  if (!f.ok()) return std::nullopt;
  return std::move(f.beta_hat);
}

}  // namespace obree
