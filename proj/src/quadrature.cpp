// SPDX-License-Identifier: Apache-2.0
#include "kspec/quadrature.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "kspec/types.hpp"

namespace kspec {

Rule1D golub_welsch(const std::vector<double>& a, const std::vector<double>& b2, double mass) {
  const int n = static_cast<int>(a.size());
  if (n < 1) throw ConfigError("quadrature: need at least one node");
  Rule1D rule;
  if (n == 1) {
    rule.x = {a[0]};
    rule.w = {mass};
    return rule;
  }
  Vec diag(n), sub(n - 1);
  for (int k = 0; k < n; ++k) diag(k) = a[k];
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(b2[k]);
  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("quadrature: tridiagonal eigensolve failed");
  rule.x.resize(n);
  rule.w.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.x[k] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    rule.w[k] = mass * v0 * v0;
  }
  return rule;
}

Rule1D gauss_hermite(int n) {
  std::vector<double> a(n, 0.0), b2(n, 0.0);
  for (int k = 1; k < n; ++k) b2[k] = k;
  Rule1D r = golub_welsch(a, b2, std::sqrt(2.0 * pi));
  // Symmetrize against eigensolver round-off.
  for (int k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (r.x[n - 1 - k] - r.x[k]);
    const double w = 0.5 * (r.w[n - 1 - k] + r.w[k]);
    r.x[k] = -x;
    r.x[n - 1 - k] = x;
    r.w[k] = r.w[n - 1 - k] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

Rule1D gauss_laguerre(int n, double alpha) {
  if (alpha <= -1.0) throw ConfigError("gauss_laguerre: alpha must exceed -1");
  std::vector<double> a(n), b2(n, 0.0);
  for (int k = 0; k < n; ++k) a[k] = 2.0 * k + alpha + 1.0;
  for (int k = 1; k < n; ++k) b2[k] = k * (k + alpha);
  return golub_welsch(a, b2, std::tgamma(alpha + 1.0));
}

Rule1D gauss_legendre(int n, double lo, double hi) {
  std::vector<double> a(n, 0.0), b2(n, 0.0);
  for (int k = 1; k < n; ++k) b2[k] = double(k) * k / (4.0 * k * k - 1.0);
  Rule1D r = golub_welsch(a, b2, 2.0);
  for (int k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (r.x[n - 1 - k] - r.x[k]);
    const double w = 0.5 * (r.w[n - 1 - k] + r.w[k]);
    r.x[k] = -x;
    r.x[n - 1 - k] = x;
    r.w[k] = r.w[n - 1 - k] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (int k = 0; k < n; ++k) {
    r.x[k] = mid + half * r.x[k];
    r.w[k] *= half;
  }
  return r;
}

Rule1D trapezoid_periodic(int n) {
  Rule1D r;
  r.x.resize(n);
  r.w.assign(n, 2.0 * pi / n);
  for (int k = 0; k < n; ++k) r.x[k] = 2.0 * pi * k / n;
  return r;
}

}  // namespace kspec
