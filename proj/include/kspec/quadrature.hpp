// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace kspec {

// One-dimensional quadrature rule; nodes ascending.
struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
  int size() const { return static_cast<int>(x.size()); }
};

// Gauss rule from the three-term recurrence (Golub-Welsch). a[k] are the
// diagonal recurrence coefficients, b2[k] (k >= 1) the squared off-diagonals,
// mass the integral of the weight function.
Rule1D golub_welsch(const std::vector<double>& a, const std::vector<double>& b2, double mass);

// Weight exp(-x^2/2) on the real line.
Rule1D gauss_hermite(int n);

// Weight x^alpha exp(-x) on (0, inf), alpha > -1.
Rule1D gauss_laguerre(int n, double alpha);

// Unit weight on [lo, hi].
Rule1D gauss_legendre(int n, double lo = -1.0, double hi = 1.0);

// n-point periodic trapezoid on [0, 2pi).
Rule1D trapezoid_periodic(int n);

}  // namespace kspec
