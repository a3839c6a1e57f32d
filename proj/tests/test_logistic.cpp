#include "obree/logistic.hpp"
#include "obree/logistic_model.hpp"

#include <doctest.h>

#include <cmath>

using namespace obree;

namespace {

// Plain Newton-Raphson on the log-likelihood, no safeguards: the oracle for
// well-conditioned fits.
ParamVector newton_oracle(const DesignMatrix& X, const Eigen::VectorXd& y) {
  ParamVector beta = ParamVector::Zero(X.cols());
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd mu(X.rows()), w(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      mu(i) = 1.0 / (1.0 + std::exp(-X.row(i).dot(beta)));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    const ParamVector step = info.ldlt().solve(X.transpose() * (y - mu));
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-14) break;
  }
  return beta;
}

DesignMatrix small_design(std::size_t n, std::size_t p, std::uint64_t seed) {
  return generate_design(n, p, 0.0, StreamKey{seed, {{TagLabel::unit, 0}}}, CovariateScale::sd);
}

}  // namespace

TEST_CASE("expit and log1pexp are stable in both tails") {
  CHECK(expit(0.0) == 0.5);
  CHECK(expit(800.0) == 1.0);
  CHECK(expit(-800.0) >= 0.0);
  CHECK(expit(-30.0) == doctest::Approx(std::exp(-30.0)).epsilon(1e-12));
  CHECK(log1pexp(800.0) == doctest::Approx(800.0));
  CHECK(log1pexp(-50.0) == doctest::Approx(std::exp(-50.0)).epsilon(1e-12));
  CHECK(log1pexp(1.3) == doctest::Approx(std::log(1.0 + std::exp(1.3))).epsilon(1e-15));
}

TEST_CASE("design spread follows the chosen reading of 4/sqrt(n)") {
  const std::size_t n = 400, p = 50;
  for (CovariateScale scale : {CovariateScale::variance, CovariateScale::sd}) {
    const DesignMatrix X = generate_design(n, p, 0.6, StreamKey{4, {{TagLabel::unit, 0}}}, scale);
    const double mean = X.mean();
    const double var = (X.array() - mean).square().sum() / (X.size() - 1.0);
    const double target = scale == CovariateScale::variance ? 4.0 / std::sqrt(n) : 16.0 / n;
    const double N = static_cast<double>(X.size());
    CHECK(std::abs(mean - 0.6) < 4.0 * std::sqrt(target / N));
    CHECK(std::abs(var - target) < 4.0 * target * std::sqrt(2.0 / N));
  }
  CHECK_THROWS(generate_design(3, 4, 0.0, StreamKey{}));
}

TEST_CASE("IRLS agrees with the Newton oracle and zeroes the score") {
  const DesignMatrix X = small_design(300, 5, 11);
  const ParamVector beta0 = (ParamVector(5) << 1.0, -2.0, 0.5, 0.0, 1.5).finished();
  RandomStream s = derive_stream(StreamKey{11, {{TagLabel::rep, 1}}});
  const Eigen::VectorXd y = to_real(simulate_responses(X, beta0, s));
  const FitResult fit = fit_mle(X, y);
  REQUIRE(fit.ok());
  CHECK(logistic_score(X, y, fit.beta_hat).lpNorm<Eigen::Infinity>() <= 1e-9);
  CHECK((fit.beta_hat - newton_oracle(X, y)).lpNorm<Eigen::Infinity>() < 1e-8);
  // The maximiser beats nearby points.
  const double ll = logistic_loglik(X, y, fit.beta_hat);
  for (Eigen::Index j = 0; j < 5; ++j) {
    ParamVector b = fit.beta_hat;
    b(j) += 1e-3;
    CHECK(logistic_loglik(X, y, b) < ll);
  }
}

TEST_CASE("fractional responses fit too") {
  const DesignMatrix X = small_design(120, 3, 2);
  Eigen::VectorXd y(120);
  for (Eigen::Index i = 0; i < 120; ++i) y(i) = (i % 3 == 0) ? 0.9 : (i % 3 == 1 ? 0.1 : 0.5);
  const FitResult fit = fit_mle(X, y);
  REQUIRE(fit.ok());
  CHECK((fit.beta_hat - newton_oracle(X, y)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("separated data is flagged, not returned") {
  DesignMatrix X(4, 2);
  X << 1, 1, 1, 2, 1, 3, 1, 4;
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 0, 0, 1, 1).finished();
  const FitResult fit = fit_mle(X, y);
  CHECK(fit.diverging);
  CHECK_FALSE(fit.ok());
}

TEST_CASE("slope-only model on x = 1..4, y = 0,0,1,1 has a finite MLE") {
  // Without an intercept the responses are not separable through the origin.
  DesignMatrix X(4, 1);
  X << 1, 2, 3, 4;
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 0, 0, 1, 1).finished();
  const FitResult fit = fit_mle(X, y);
  REQUIRE(fit.ok());
  CHECK(std::abs(logistic_score(X, y, fit.beta_hat)(0)) < 1e-9);
  CHECK(fit.beta_hat(0) == doctest::Approx(newton_oracle(X, y)(0)).epsilon(1e-10));
}

TEST_CASE("rank-deficient designs are reported") {
  DesignMatrix X(6, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
  const Eigen::VectorXd y = (Eigen::VectorXd(6) << 0, 1, 0, 1, 1, 0).finished();
  CHECK_FALSE(fit_mle(X, y).ok());
}

TEST_CASE("information matrix is X^T W X") {
  const DesignMatrix X = small_design(50, 3, 8);
  const ParamVector beta = (ParamVector(3) << 0.3, -0.7, 1.1).finished();
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(3, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double mu = 1.0 / (1.0 + std::exp(-X.row(i).dot(beta)));
    oracle += mu * (1.0 - mu) * X.row(i).transpose() * X.row(i);
  }
  CHECK((logistic_information(X, beta) - oracle).norm() < 1e-12);
}

TEST_CASE("responses are monotone in the linear predictor on common draws") {
  const DesignMatrix X = small_design(200, 2, 3);
  const ParamVector lo = (ParamVector(2) << 0.5, -0.5).finished();
  const ParamVector hi = (ParamVector(2) << 1.5, 0.5).finished();
  RandomStream a = derive_stream(StreamKey{3, {{TagLabel::rep, 9}}});
  RandomStream b = derive_stream(StreamKey{3, {{TagLabel::rep, 9}}});
  const BinaryResponses ylo = simulate_responses(X, lo, a);
  const BinaryResponses yhi = simulate_responses(X, hi, b);
  const Eigen::VectorXd dlo = X * lo, dhi = X * hi;
  for (std::size_t i = 0; i < ylo.size(); ++i)
    if (dhi(static_cast<Eigen::Index>(i)) >= dlo(static_cast<Eigen::Index>(i))) CHECK(yhi[i] >= ylo[i]);
}

TEST_CASE("contamination swaps responses of the most extreme pairs") {
  const BinaryResponses y{1, 0, 1, 0, 1, 0, 1, 0, 1, 1};
  const std::vector<double> mu{0.9, 0.05, 0.5, 0.2, 0.99, 0.3, 0.6, 0.01, 0.7, 0.4};
  // rate 0.4 on n = 10: two pairs. Largest mu: idx 4 (0.99), 0 (0.9);
  // smallest: idx 7 (0.01), 1 (0.05).
  const BinaryResponses out = contaminate(y, mu, 0.4);
  BinaryResponses expected = y;
  std::swap(expected[4], expected[7]);
  std::swap(expected[0], expected[1]);
  CHECK(out == expected);
  CHECK(contaminate(y, mu, 0.0) == y);
  CHECK_THROWS(contaminate(y, mu, 0.1));
  CHECK_THROWS(contaminate(y, std::vector<double>(3, 0.5), 0.4));
}

TEST_CASE("LogisticModel simulate/estimate round trip") {
  const DesignMatrix X = small_design(150, 2, 21);
  const LogisticModel model(X, LogisticEstimator{});
  const ParamVector beta = (ParamVector(2) << 1.0, -1.0).finished();
  RandomStream s = derive_stream(StreamKey{1, {{TagLabel::rep, 1}}});
  const BinaryResponses y = model.simulate(beta, s);
  const auto est = model.estimate(y);
  REQUIRE(est.has_value());
  CHECK((*est - fit_mle(X, to_real(y)).beta_hat).norm() == 0.0);
}
