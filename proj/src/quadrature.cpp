#include "obree/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace obree {

GaussHermiteRule gauss_hermite(int K) {
  if (K < 1) throw std::invalid_argument("gauss_hermite: K must be >= 1");
  const auto n = static_cast<std::size_t>(K);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  std::vector<double> x(n), log_w(n);
  std::vector<double> roots;  // positive roots, largest first, seed the next guess

  double z = 0.0;
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * K + 1.0) - 1.85575 * std::pow(2.0 * K + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(K), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * roots[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * roots[1];
    else
      z = 2.0 * z - roots[i - 2];

    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= K; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * K) * p2;
      const double z_prev = z;
      z = z_prev - p1 / pp;
      if (std::abs(z - z_prev) <= 1e-15 * (1.0 + std::abs(z))) break;
    }
    // Re-evaluate the derivative at the converged node.
    {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= K; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * K) * p2;
    }
    // Newton runs from the largest root down; store ascending.
    roots.push_back(z);
    x[n - 1 - i] = z;
    x[i] = -z;
    const double lw = std::log(2.0) - 2.0 * std::log(std::abs(pp));
    log_w[i] = log_w[n - 1 - i] = lw;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;

  GaussHermiteRule rule;
  rule.nodes = std::move(x);
  rule.log_weights_plus_square.resize(n);
  rule.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    rule.weights[k] = std::exp(log_w[k]);
    rule.log_weights_plus_square[k] = log_w[k] + rule.nodes[k] * rule.nodes[k];
  }
  return rule;
}

}  // namespace obree
