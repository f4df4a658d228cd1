// Test-local reference computations kept independent of the library sources.
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline constexpr double pi = 3.14159265358979323846;

// Normalized probabilists' Hermite polynomial He_n / sqrt(n!).
inline double he(int n, double x) {
  if (n == 0) return 1.0;
  double a = 1.0, b = x;
  for (int k = 1; k < n; ++k) {
    const double c = x * b - k * a;
    a = b;
    b = c;
  }
  double fact = 1.0;
  for (int k = 2; k <= n; ++k) fact *= k;
  return b / std::sqrt(fact);
}

// Gauss-Legendre on [a, b] by Golub-Welsch.
inline void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < n; ++k) {
    const double t = es.eigenvalues()(k), v0 = es.eigenvectors()(0, k);
    x[k] = 0.5 * (a + b) + 0.5 * (b - a) * t;
    w[k] = (b - a) * v0 * v0;
  }
}

// Gauss-Hermite for the weight exp(-x^2/2) by Golub-Welsch.
inline void gauss_hermite(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < n; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    x[k] = es.eigenvalues()(k);
    w[k] = std::sqrt(2.0 * pi) * v0 * v0;
  }
}

// Integral of f over [a, b] with geometrically graded Gauss-Legendre panels
// refined towards a.
template <class F>
double graded_integral(F&& f, double a, double b, int panels, double ratio = 0.5, int nodes = 20) {
  std::vector<double> x, w;
  double s = 0.0, hi = b;
  for (int p = 0; p < panels; ++p) {
    const double lo = (p + 1 == panels) ? a : a + (hi - a) * ratio;
    gauss_legendre(nodes, lo, hi, x, w);
    for (int k = 0; k < nodes; ++k) s += w[k] * f(x[k]);
    hi = lo;
  }
  return s;
}

}  // namespace oracle
