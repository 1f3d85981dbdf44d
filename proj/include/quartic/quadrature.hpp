#pragma once

#include <vector>

namespace quartic {

/// One-dimensional quadrature rule: nodes and weights.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [a, b].
Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Shared n-point Gauss-Legendre rule on [-1, 1]; built once per n, thread-safe.
const Rule1D& cached_gauss_legendre(int n);

/// n-point generalized Gauss-Laguerre rule for the weight s^alpha e^{-s} on [0, inf).
Rule1D gauss_laguerre(int n, double alpha = 0.0);

/// n-point composite trapezoid rule on [a, b] (endpoints included).
Rule1D trapezoid(int n, double a, double b);

/// Barycentric weights for Lagrange interpolation through `nodes`.
std::vector<double> barycentric_weights(const std::vector<double>& nodes);

}  // namespace quartic
