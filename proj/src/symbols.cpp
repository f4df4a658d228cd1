// SPDX-License-Identifier: Apache-2.0
#include "kspec/symbols.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kspec/quadrature.hpp"

namespace kspec {

double eval_symbol_a(const double* v, const double* eta, int d, double gamma, double s, double K0) {
  double v2 = 0.0, e2 = 0.0, ve = 0.0;
  for (int i = 0; i < d; ++i) {
    v2 += v[i] * v[i];
    e2 += eta[i] * eta[i];
    ve += v[i] * eta[i];
  }
  const double wedge = std::max(0.0, e2 * v2 - ve * ve);
  const double jv = 1.0 + v2;  // <v>^2
  return std::pow(jv, 0.5 * gamma) * std::pow(1.0 + e2 + wedge + v2, s) + K0 * std::pow(jv, 0.5 * gamma + s);
}

double eval_symbol_a(const Vec& v, const Vec& eta, double gamma, double s, double K0) {
  if (v.size() != eta.size()) throw ConfigError("eval_symbol_a: dimension mismatch");
  return eval_symbol_a(v.data(), eta.data(), static_cast<int>(v.size()), gamma, s, K0);
}

void SymbolGrid::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("SymbolGrid: dim must be 1 or 2");
  if (n_points < 2 || n_points % 2 != 0) throw ConfigError("SymbolGrid: n_points must be even and >= 2");
  if (!(v_extent > 0.0)) throw ConfigError("SymbolGrid: v_extent must be positive");
  if (dv() * deta() * n_points < 1.0 - 1e-12) throw ConfigError("SymbolGrid: sampling bound violated");
}

Vec SymbolGrid::v_axis() const {
  Vec a(n_points);
  for (int j = 0; j < n_points; ++j) a(j) = -v_extent + j * dv();
  return a;
}

Vec SymbolGrid::eta_axis() const {
  Vec a(n_points);
  for (int m = 0; m < n_points; ++m) a(m) = (m - n_points / 2) * deta();
  return a;
}

int SymbolGrid::size() const { return dim == 1 ? n_points : n_points * n_points; }

void SymbolGrid::point(int k, double* out, const Vec& axis) const {
  out[0] = axis(k % n_points);
  if (dim == 2) out[1] = axis(k / n_points);
}

CMat weyl_quantize(const SymbolGrid& grid, const PhaseSymbol& symbol, Diagnostics* diag) {
  grid.validate();
  const int n = grid.n_points, d = grid.dim, ns = 2 * n - 1;
  const double dv = grid.dv();
  const Vec eta = grid.eta_axis();
  // phase[(j - k + n - 1) * n + m] = exp(2 pi i (j - k) dv eta_m)
  std::vector<cplx> phase(static_cast<size_t>(ns) * n);
  for (int t = 0; t < ns; ++t)
    for (int m = 0; m < n; ++m) phase[t * n + m] = std::polar(1.0, 2.0 * pi * (t - n + 1) * dv * eta(m));
  auto mid = [&](int s2) { return -grid.v_extent + 0.5 * s2 * dv; };
  const double scale = std::pow(grid.deta() * dv, d);

  if (diag) {
    double vz[2] = {0.0, 0.0}, ez[2] = {0.0, 0.0};
    const double center = std::abs(symbol(vz, ez));
    double edge = 0.0;
    for (int m = 0; m < n; ++m) {
      double v[2] = {-grid.v_extent, -grid.v_extent}, e[2] = {eta(m), eta(m)};
      edge = std::max(edge, std::abs(symbol(v, e)));
      double e0[2] = {eta(0), eta(0)}, vm[2] = {mid(2 * m), mid(2 * m)};
      edge = std::max(edge, std::abs(symbol(vm, e0)));
    }
    if (edge > 1e-3 * center) {
      std::ostringstream os;
      os << "weyl_quantize: boundary symbol magnitude " << edge << " exceeds 1e-3 of central value " << center;
      diag->warn(os.str());
    }
  }

  if (d == 1) {
    Mat tab(ns, n);
    for (int s2 = 0; s2 < ns; ++s2)
      for (int m = 0; m < n; ++m) {
        double v = mid(s2), e = eta(m);
        tab(s2, m) = symbol(&v, &e);
      }
    CMat A(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        cplx acc = 0.0;
        const cplx* ph = &phase[(j - k + n - 1) * n];
        for (int m = 0; m < n; ++m) acc += ph[m] * tab(j + k, m);
        A(j, k) = scale * acc;
      }
    return A;
  }

  // d = 2: symbol table over midpoint pairs (s1, s2) and eta pairs (m1, m2).
  const int ne = n * n;
  Mat tab(static_cast<Eigen::Index>(ns) * ns, ne);
  for (int s1 = 0; s1 < ns; ++s1)
    for (int s2 = 0; s2 < ns; ++s2)
      for (int m2 = 0; m2 < n; ++m2)
        for (int m1 = 0; m1 < n; ++m1) {
          double v[2] = {mid(s1), mid(s2)}, e[2] = {eta(m1), eta(m2)};
          tab(s1 + ns * s2, m1 + n * m2) = symbol(v, e);
        }
  CMat A(ne, ne);
  std::vector<cplx> ph2(ne);
  for (int j2 = 0; j2 < n; ++j2)
    for (int k2 = 0; k2 < n; ++k2)
      for (int j1 = 0; j1 < n; ++j1)
        for (int k1 = 0; k1 < n; ++k1) {
          const cplx* p1 = &phase[(j1 - k1 + n - 1) * n];
          const cplx* p2 = &phase[(j2 - k2 + n - 1) * n];
          const int row = j1 + k1 + ns * (j2 + k2);
          cplx acc = 0.0;
          for (int m2 = 0; m2 < n; ++m2) {
            cplx inner = 0.0;
            for (int m1 = 0; m1 < n; ++m1) inner += p1[m1] * tab(row, m1 + n * m2);
            acc += p2[m2] * inner;
          }
          A(j1 + n * j2, k1 + n * k2) = scale * acc;
        }
  return A;
}

Mat galerkin_symbol_matrix(const HermiteBasis& basis, const PhaseSymbol& symbol, const GalerkinSymbolOptions& opt,
                           HermiteBasis* rows_out, double* imag_defect) {
  const int d = basis.dim_v, Nc = basis.max_degree, Nr = Nc + opt.pad;
  if (d < 1 || d > 3) throw ConfigError("galerkin_symbol_matrix: d must be 1, 2 or 3");
  if (opt.pad < 0 || opt.n_x < 2 || opt.n_eta < 2) throw ConfigError("galerkin_symbol_matrix: bad options");
  const HermiteBasis rows = build_basis(d, Nr, Nr + 1);
  const int pairs = (Nr + 1) * (Nc + 1);
  const Rule1D gx = gauss_hermite(opt.n_x), gy = gauss_hermite(opt.n_eta);
  const Rule1D gz = gauss_hermite((Nr + Nc) / 2 + 1);
  const int P = opt.n_x * opt.n_eta;

  // One-axis cross-Wigner table with quadrature weights folded in:
  // W_ab(x, eta) = 2 exp(-x^2/2 - 8 pi^2 eta^2) E[h_a(x + iy + Z) h_b(x - iy - Z)], y = 4 pi eta.
  CMat T = CMat::Zero(pairs, P);
  Vec xs(P), es(P);
  std::vector<cplx> ha(Nr + 1), hb(Nr + 1);
  for (int jy = 0; jy < opt.n_eta; ++jy)
    for (int ix = 0; ix < opt.n_x; ++ix) {
      const int node = ix + opt.n_x * jy;
      const double x = gx.x[ix], y = gy.x[jy];
      xs(node) = x;
      es(node) = y / (4.0 * pi);
      const double wq = 2.0 * gx.w[ix] * gy.w[jy] / (4.0 * pi);
      for (int k = 0; k < gz.size(); ++k) {
        const double z = gz.x[k], wz = gz.w[k] / std::sqrt(2.0 * pi);
        hermite_table(cplx(x + z, y), Nr, ha.data());
        hermite_table(cplx(x - z, -y), Nr, hb.data());
        for (int a = 0; a <= Nr; ++a)
          for (int b = 0; b <= Nc; ++b) T(a * (Nc + 1) + b, node) += wq * wz * ha[a] * hb[b];
      }
    }

  // Symbol on the tensor grid, first axis fastest.
  long cols = 1;
  for (int i = 1; i < d; ++i) cols *= P;
  Mat S(P, cols);
  {
    double v[3], e[3];
    for (long c = 0; c < cols; ++c) {
      long rest = c;
      for (int i = 1; i < d; ++i) {
        const int node = static_cast<int>(rest % P);
        rest /= P;
        v[i] = xs(node);
        e[i] = es(node);
      }
      for (int n1 = 0; n1 < P; ++n1) {
        v[0] = xs(n1);
        e[0] = es(n1);
        S(n1, c) = symbol(v, e);
      }
    }
  }

  // Contract one axis at a time; transposing moves the next axis to the front.
  CMat X;
  {
    CMat Y(pairs, cols);
    Y.real() = T.real() * S;
    Y.imag() = T.imag() * S;
    X = Y.transpose();
  }
  S.resize(0, 0);
  for (int step = 1; step < d; ++step) {
    Eigen::Map<CMat> Xm(X.data(), P, X.size() / P);
    CMat Y = T * Xm;
    X = Y.transpose();
  }

  const int nr = rows.size(), nc = basis.size();
  Mat Q(nr, nc);
  double defect = 0.0;
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) {
      long idx = 0, stride = 1;
      for (int i = 0; i < d; ++i) {
        idx += stride * (rows.index_set(r, i) * (Nc + 1) + basis.index_set(c, i));
        stride *= pairs;
      }
      const cplx val = X.data()[idx];
      Q(r, c) = val.real();
      defect = std::max(defect, std::abs(val.imag()));
    }
  if (rows_out) *rows_out = rows;
  if (imag_defect) *imag_defect = defect;
  return Q;
}

namespace {

WeightedGram finish_gram(Mat M, double defect) {
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  WeightedGram g;
  g.lambda_min = es.eigenvalues()(0);
  if (!(g.lambda_min > 0.0)) {
    std::ostringstream os;
    os << "weighted_gram: lambda_min = " << g.lambda_min << " <= 0; raise K0";
    throw NumericalError(os.str());
  }
  g.M_a_inv_gram = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  g.M_a_inv_gram = 0.5 * (g.M_a_inv_gram + g.M_a_inv_gram.transpose()).eval();
  g.M_a = std::move(M);
  g.imag_defect = defect;
  return g;
}

}  // namespace

WeightedGram weighted_gram(const HermiteBasis& basis, const SymbolParams& p, int sign, const GalerkinSymbolOptions& opt) {
  if (sign != 1 && sign != -1) throw ConfigError("weighted_gram: sign must be +1 or -1");
  if (!(p.K0 >= 0.0)) throw ConfigError("weighted_gram: K0 must be nonnegative");
  const int d = basis.dim_v;
  const double e = 0.5 * sign;
  PhaseSymbol sym = [&](const double* v, const double* eta) {
    return std::pow(eval_symbol_a(v, eta, d, p.gamma, p.s, p.K0), e);
  };
  double defect = 0.0;
  const Mat Q = galerkin_symbol_matrix(basis, sym, opt, nullptr, &defect);
  return finish_gram(Q.transpose() * Q, defect);
}

WeightedGram weighted_gram(const SymbolGrid& grid, int sign, Diagnostics* diag) {
  if (sign != 1 && sign != -1) throw ConfigError("weighted_gram: sign must be +1 or -1");
  const SymbolParams p = grid.params;
  const int d = grid.dim;
  const double e = 0.5 * sign;
  PhaseSymbol sym = [&](const double* v, const double* eta) {
    return std::pow(eval_symbol_a(v, eta, d, p.gamma, p.s, p.K0), e);
  };
  const CMat A = weyl_quantize(grid, sym, diag);
  const CMat M = A.adjoint() * A;
  // The Gram of a Hermitian A is real only for real-symmetric A; keep the
  // real part and report what was dropped.
  double defect = M.imag().cwiseAbs().maxCoeff();
  return finish_gram(M.real(), defect);
}

K0Search find_K0_min(const HermiteBasis& basis, SymbolParams p, const GalerkinSymbolOptions& opt, double target,
                     double K0_max, double tol) {
  auto lam = [&](double K0) {
    p.K0 = K0;
    try {
      return weighted_gram(basis, p, 1, opt).lambda_min;
    } catch (const NumericalError&) {
      return 0.0;
    }
  };
  K0Search out;
  double f0 = lam(0.0);
  if (f0 >= target) {
    out.K0_min = 0.0;
    out.lambda_at_min = f0;
    return out;
  }
  double hi_val = lam(K0_max);
  if (hi_val < target) throw NumericalError("find_K0_min: target not reached at K0_max");
  double lo = 0.0, hi = K0_max;
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    const double v = lam(mid);
    ++out.iterations;
    if (v >= target) {
      hi = mid;
      hi_val = v;
    } else {
      lo = mid;
    }
  }
  out.K0_min = hi;
  out.lambda_at_min = hi_val;
  return out;
}

}  // namespace kspec
