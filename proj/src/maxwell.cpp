// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/spherical_harmonic.hpp>

#include "kspec/collision.hpp"

namespace kspec {

namespace {

// Monomial coefficients of x^k P_l(x).
std::vector<double> burnett_poly(int k, int l) {
  std::vector<double> pm(1, 1.0), p(2, 0.0);
  p[1] = 1.0;
  if (l == 0) p = pm;
  for (int j = 1; j < l; ++j) {
    // (j+1) P_{j+1} = (2j+1) x P_j - j P_{j-1}
    std::vector<double> next(j + 2, 0.0);
    for (int i = 0; i <= j; ++i) next[i + 1] += (2.0 * j + 1.0) * p[i] / (j + 1.0);
    for (int i = 0; i < j; ++i) next[i] -= j * pm[i] / (j + 1.0);
    pm = p;
    p = next;
  }
  std::vector<double> out(p.size() + k, 0.0);
  for (size_t i = 0; i < p.size(); ++i) out[i + k] = p[i];
  return out;
}

double horner(const std::vector<double>& c, double x) {
  double r = 0.0;
  for (size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

// Generalized Laguerre L_n^{(a)}(x).
double laguerre(int n, double a, double x) {
  double l0 = 1.0;
  if (n == 0) return l0;
  double l1 = 1.0 + a - x;
  for (int k = 1; k < n; ++k) {
    const double l2 = ((2.0 * k + 1.0 + a - x) * l1 - (k + a) * l0) / (k + 1.0);
    l0 = l1;
    l1 = l2;
  }
  return l1;
}

// |v|^l times the real spherical harmonic of order m.
double solid_harmonic(int l, int m, const double* v) {
  const double r = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (r == 0.0) return l == 0 ? 0.5 / std::sqrt(pi) : 0.0;
  const double th = std::acos(std::clamp(v[2] / r, -1.0, 1.0));
  const double ph = std::atan2(v[1], v[0]);
  double y;
  if (m > 0)
    y = std::sqrt(2.0) * boost::math::spherical_harmonic_r(l, m, th, ph);
  else if (m < 0)
    y = std::sqrt(2.0) * boost::math::spherical_harmonic_i(l, -m, th, ph);
  else
    y = boost::math::spherical_harmonic_r(l, 0, th, ph);
  return std::pow(r, l) * y;
}

}  // namespace

double maxwell_eigenvalue(int n, int l, const CollisionKernelSpec& spec) {
  if (n < 0 || l < 0) throw ConfigError("maxwell_eigenvalue: negative index");
  if ((n == 0 && l <= 1) || (n == 1 && l == 0)) return 0.0;
  const int k = 2 * n + l;
  const std::vector<double> p = burnett_poly(k, l);
  // q(x) = (p(x) - 1) / (x - 1) by synthetic division (p(1) = 1).
  std::vector<double> q(p.size() - 1, 0.0);
  double run = 0.0;
  for (size_t i = p.size() - 1; i >= 1; --i) {
    run += p[i];
    q[i - 1] = run;
  }
  // Integrand b sin(theta) F(theta) with F = (c - 1) q(c) + p(s), c = cos(theta/2),
  // s = sin(theta/2). Written as theta^{-2s} (or 1) times bounded factors.
  auto F_over_theta2 = [&](double t) {
    const double c = std::cos(0.5 * t), s = std::sin(0.5 * t);
    const double q4 = std::sin(0.25 * t) / t;
    double f = -2.0 * q4 * q4 * horner(q, c);
    // p(s) = s^k P_l(s), k >= 2 here.
    const double s_t = s / t;
    f += s_t * s_t * std::pow(s, k - 2) * horner(burnett_poly(0, l), s);
    return f;
  };
  auto integrand = [&](double t) -> double {
    if (t <= 0.0) return 0.0;
    const double sinc = std::sin(t) / t;
    if (spec.cutoff) return spec.b_amplitude * t * t * t * sinc * F_over_theta2(t);
    // b sin(theta) theta^2 = b_amplitude theta^{3 - (d-1) - 2s} sinc(theta), d = 3.
    return spec.b_amplitude * std::pow(t, 1.0 - 2.0 * spec.s) * sinc * F_over_theta2(t);
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  const double val = ts.integrate(integrand, 0.0, 0.5 * pi);
  return 2.0 * pi * val;
}

MaxwellDiagonal maxwell_diagonal(const HermiteBasis& basis, const CollisionKernelSpec& spec) {
  spec.validate();
  if (spec.gamma != 0.0) throw ConfigError("maxwell_diagonal backend requires gamma = 0");
  if (basis.dim_v != 3 || spec.d != 3) throw ConfigError("maxwell_diagonal backend requires d = 3");
  const int N = basis.max_degree;
  MaxwellDiagonal md;
  for (int deg = 0; deg <= N; ++deg)
    for (int l = deg % 2; l <= deg; l += 2)
      for (int m = -l; m <= l; ++m) md.modes.push_back({(deg - l) / 2, l, m});
  const int nm = static_cast<int>(md.modes.size()), nb = basis.size();
  if (nm != nb) throw NumericalError("maxwell_diagonal: Burnett mode count differs from basis size");

  // Hermite coefficients by exact Gauss-Hermite quadrature (polynomial degree <= 2N).
  const Mat& nodes = basis.quad_nodes;
  const double norm = std::pow(2.0 * pi, -1.5);
  Mat H(nb, nodes.cols());
  for (Eigen::Index q = 0; q < nodes.cols(); ++q) basis.eval_poly(nodes.col(q).data(), H.col(q).data());
  Mat B(nm, nodes.cols());
  for (Eigen::Index q = 0; q < nodes.cols(); ++q) {
    const double* v = nodes.col(q).data();
    const double r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    for (int k = 0; k < nm; ++k) {
      const BurnettMode& bm = md.modes[k];
      B(k, q) = laguerre(bm.n, bm.l + 0.5, 0.5 * r2) * solid_harmonic(bm.l, bm.m, v) * basis.quad_weights(q) * norm;
    }
  }
  md.change_of_basis = H * B.transpose();
  for (int k = 0; k < nm; ++k) md.change_of_basis.col(k).normalize();
  const double orth = (md.change_of_basis.transpose() * md.change_of_basis - Mat::Identity(nm, nm)).cwiseAbs().maxCoeff();
  if (orth > 1e-10) {
    std::ostringstream os;
    os << "maxwell_diagonal: Burnett vectors not orthonormal (defect " << orth << ")";
    throw NumericalError(os.str());
  }
  md.eigenvalues.resize(nm);
  std::vector<double> cache((N + 1) * (N + 1), std::nan(""));
  for (int k = 0; k < nm; ++k) {
    double& e = cache[md.modes[k].n * (N + 1) + md.modes[k].l];
    if (std::isnan(e)) e = maxwell_eigenvalue(md.modes[k].n, md.modes[k].l, spec);
    md.eigenvalues(k) = e;
  }
  return md;
}

LinearizedOperator assemble_L_maxwell_diagonal(const HermiteBasis& basis, const CollisionKernelSpec& spec) {
  const MaxwellDiagonal md = maxwell_diagonal(basis, spec);
  LinearizedOperator op;
  op.basis = basis;
  op.kernel = spec;
  op.kernel.backend = CollisionBackend::maxwell_diagonal;
  const Mat& C = md.change_of_basis;
  op.L = C * md.eigenvalues.asDiagonal() * C.transpose();
  op.L = 0.5 * (op.L + op.L.transpose()).eval();
  op.quadrature_tolerance = 1e-12 * std::max(1.0, md.eigenvalues.cwiseAbs().maxCoeff());
  return op;
}

}  // namespace kspec
