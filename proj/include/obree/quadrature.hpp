#pragma once

#include <vector>

namespace obree {

/// Gauss-Hermite rule for integrals against exp(-x^2).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  /// log(w_k) + x_k^2, the weights of the rule written for a plain integrand.
  std::vector<double> log_weights_plus_square;

  std::size_t size() const { return nodes.size(); }
};

/// K-point rule, nodes in ascending order. Newton iteration on orthonormal
/// Hermite polynomials keeps the tail weights relatively accurate.
GaussHermiteRule gauss_hermite(int K);

}  // namespace obree
