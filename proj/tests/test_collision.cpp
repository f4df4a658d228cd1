#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "kspec/collision.hpp"
#include "oracles.hpp"

using namespace kspec;

namespace {

CollisionKernelSpec maxwell(double s) {
  CollisionKernelSpec k;
  k.s = s;
  return k;
}

CollisionKernelSpec cutoff_kernel(CollisionBackend be) {
  CollisionKernelSpec k;
  k.cutoff = true;
  k.backend = be;
  return k;
}

// Maxwell-molecule eigenvalue from the classical angular integral
// 2 pi int b sin(theta) [c^k P_l(c) + s^k P_l(s) - 1] dtheta, c = cos(theta/2),
// s = sin(theta/2), k = 2n + l. The near-grazing part uses F ~ F2 theta^2.
double maxwell_oracle(int n, int l, double s_exp, bool cutoff) {
  const int k = 2 * n + l;
  auto F = [&](double t) {
    const double c = std::cos(0.5 * t), s = std::sin(0.5 * t);
    return std::pow(c, k) * std::legendre(l, c) + std::pow(s, k) * std::legendre(l, s) - 1.0;
  };
  auto b = [&](double t) { return cutoff ? 1.0 : std::pow(t, -2.0 - 2.0 * s_exp); };
  const double t0 = 2e-3;
  const double body = oracle::graded_integral([&](double t) { return b(t) * std::sin(t) * F(t); }, t0, 0.5 * oracle::pi, 24);
  // F(t) ~ F2 t^2 - F4 t^4, estimated from two small angles.
  const double t1 = t0, t2 = 0.5 * t0;
  const double g1 = F(t1) / (t1 * t1), g2 = F(t2) / (t2 * t2);
  const double F4 = (g2 - g1) / (t1 * t1 - t2 * t2), F2 = g1 + F4 * t1 * t1;
  double tail;
  if (cutoff)
    tail = F2 * std::pow(t0, 4) / 4.0 - F4 * std::pow(t0, 6) / 6.0;
  else
    tail = F2 * std::pow(t0, 2 - 2 * s_exp) / (2 - 2 * s_exp) - F4 * std::pow(t0, 4 - 2 * s_exp) / (4 - 2 * s_exp);
  return 2.0 * oracle::pi * (body + tail);
}

// Brute-force weak form for a cutoff kernel with gamma = 0:
// G[a, b, c] = int int int b mu mu_* H_a(v_*) H_b(v) (H_c(v') - H_c(v)) dsigma dv dv_*.
// After the azimuthal sigma average the integrand is a polynomial, so
// tensor Gauss-Hermite in (v, v_*) with enough nodes is exact.
std::vector<double> weak_form_tensor(const HermiteBasis& b) {
  const int nb = b.size(), N = b.max_degree;
  std::vector<double> gx, gw;
  oracle::gauss_hermite(N + 3, gx, gw);
  const int n1 = static_cast<int>(gx.size());
  std::vector<std::array<double, 3>> nodes;
  std::vector<double> wts;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n1; ++j)
      for (int k = 0; k < n1; ++k) {
        nodes.push_back({gx[i], gx[j], gx[k]});
        wts.push_back(gw[i] * gw[j] * gw[k] * std::pow(2.0 * oracle::pi, -1.5));
      }
  std::vector<double> cx, cw;
  oracle::gauss_legendre(N + 2, 0.0, 1.0, cx, cw);
  const int naz = 2 * N + 4;

  auto H = [&](const double* v, Eigen::VectorXd& out) {
    out.resize(nb);
    for (int a = 0; a < nb; ++a) {
      double p = 1.0;
      for (int i = 0; i < 3; ++i) p *= oracle::he(b.index_set(a, i), v[i]);
      out(a) = p;
    }
  };

  std::vector<double> G(static_cast<size_t>(nb) * nb * nb, 0.0);
  Eigen::VectorXd hv, hs, hp, delta;
  for (size_t iv = 0; iv < nodes.size(); ++iv) {
    const double* v = nodes[iv].data();
    H(v, hv);
    for (size_t is = 0; is < nodes.size(); ++is) {
      const double* vs = nodes[is].data();
      H(vs, hs);
      double u[3], V[3];
      for (int i = 0; i < 3; ++i) {
        u[i] = v[i] - vs[i];
        V[i] = 0.5 * (v[i] + vs[i]);
      }
      const double rho = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
      if (rho == 0.0) continue;
      double uh[3] = {u[0] / rho, u[1] / rho, u[2] / rho};
      // Frame orthogonal to u_hat.
      double e1[3], e2[3];
      double r0[3] = {0.0, 0.0, 0.0};
      r0[std::abs(uh[0]) < 0.9 ? 0 : 1] = 1.0;
      const double dot = r0[0] * uh[0] + r0[1] * uh[1] + r0[2] * uh[2];
      for (int i = 0; i < 3; ++i) e1[i] = r0[i] - dot * uh[i];
      const double n1n = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
      for (double& x : e1) x /= n1n;
      e2[0] = uh[1] * e1[2] - uh[2] * e1[1];
      e2[1] = uh[2] * e1[0] - uh[0] * e1[2];
      e2[2] = uh[0] * e1[1] - uh[1] * e1[0];
      delta = Eigen::VectorXd::Zero(nb);
      for (size_t it = 0; it < cx.size(); ++it) {
        const double ct = cx[it], st = std::sqrt(1.0 - ct * ct);
        for (int ip = 0; ip < naz; ++ip) {
          const double ph = 2.0 * oracle::pi * ip / naz;
          double vp[3];
          for (int i = 0; i < 3; ++i) {
            const double sig = ct * uh[i] + st * (std::cos(ph) * e1[i] + std::sin(ph) * e2[i]);
            vp[i] = V[i] + 0.5 * rho * sig;
          }
          H(vp, hp);
          delta += cw[it] * (2.0 * oracle::pi / naz) * (hp - hv);
        }
      }
      const double w = wts[iv] * wts[is];
      for (int a = 0; a < nb; ++a)
        for (int bb = 0; bb < nb; ++bb) {
          const double f = w * hs(a) * hv(bb);
          if (f == 0.0) continue;
          double* row = &G[(static_cast<size_t>(a) * nb + bb) * nb];
          for (int c = 0; c < nb; ++c) row[c] += f * delta(c);
        }
    }
  }
  return G;
}

}  // namespace

TEST_CASE("kernel validation") {
  CollisionKernelSpec k;
  CHECK_NOTHROW(k.validate());
  k.s = 1.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  k.s = 0.5;
  k.gamma = -1.5;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  k.gamma = 0.0;
  k.b_amplitude = 0.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  k.b_amplitude = 1.0;
  k.theta_floor = 1.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);

  CollisionKernelSpec hard;
  hard.gamma = 1.0;
  CHECK_THROWS_AS(assemble_L(build_basis(3, 2, 3), hard), ConfigError);  // Maxwell backend needs gamma = 0
  hard.backend = CollisionBackend::dirichlet_quadrature;
  CHECK_THROWS_AS(assemble_L(build_basis(2, 2, 3), hard), ConfigError);  // d = 3 only
  CHECK_THROWS_AS(backend_from_name("spectral"), ConfigError);
  CHECK(backend_from_name(backend_name(CollisionBackend::dirichlet_quadrature)) == CollisionBackend::dirichlet_quadrature);
}

TEST_CASE("angular kernel profile") {
  const CollisionKernelSpec k = maxwell(0.5);
  CHECK(k.b(0.0) == 0.0);
  CHECK(k.b(2.0) == 0.0);
  CHECK(k.b(0.5) == doctest::Approx(std::pow(0.5, -3.0)));
  const CollisionKernelSpec c = cutoff_kernel(CollisionBackend::maxwell_diagonal);
  CHECK(c.b(1.0) == 1.0);
}

TEST_CASE("Maxwell eigenvalues match the angular integral") {
  for (double s : {0.25, 0.5, 0.75})
    for (auto [n, l] : {std::pair{0, 2}, {1, 1}, {2, 0}, {1, 2}, {0, 4}, {3, 0}, {2, 2}}) {
      const double ref = maxwell_oracle(n, l, s, false);
      CHECK(maxwell_eigenvalue(n, l, maxwell(s)) == doctest::Approx(ref).epsilon(1e-7));
      CHECK(ref < 0.0);
    }
  const CollisionKernelSpec c = cutoff_kernel(CollisionBackend::maxwell_diagonal);
  for (auto [n, l] : {std::pair{0, 2}, {1, 1}, {2, 0}})
    CHECK(maxwell_eigenvalue(n, l, c) == doctest::Approx(maxwell_oracle(n, l, 0.5, true)).epsilon(1e-9));
  CHECK(maxwell_eigenvalue(0, 0, maxwell(0.5)) == 0.0);
  CHECK(maxwell_eigenvalue(1, 0, maxwell(0.5)) == 0.0);
  CHECK(maxwell_eigenvalue(0, 1, maxwell(0.5)) == 0.0);
}

TEST_CASE("Maxwell operator invariants") {
  const HermiteBasis b = build_basis(3, 6, 7);
  LinearizedOperator op = assemble_L(b, maxwell(0.5));
  const Mat Psi = kernel_vectors(b).columns;
  CHECK((op.L - op.L.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((op.L * Psi).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(op.L);
  CHECK(es.eigenvalues().maxCoeff() < 1e-10);
  int nzero = 0;
  for (int k = 0; k < es.eigenvalues().size(); ++k) nzero += std::abs(es.eigenvalues()(k)) < 1e-8;
  CHECK(nzero == 5);
  CHECK(spectral_gap(op) > 0.0);
  // Gap of the Maxwell operator is the least negative non-conserved eigenvalue.
  double top = -1e300;
  for (int n = 0; 2 * n <= 6; ++n)
    for (int l = 0; 2 * n + l <= 6; ++l)
      if (!((n == 0 && l <= 1) || (n == 1 && l == 0))) top = std::max(top, maxwell_oracle(n, l, 0.5, false));
  CHECK(spectral_gap(op) == doctest::Approx(-top).epsilon(1e-7));

  const MaxwellDiagonal md = maxwell_diagonal(b, maxwell(0.5));
  const int n = b.size();
  CHECK((md.change_of_basis.transpose() * md.change_of_basis - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("split into coercive part and compact part") {
  const HermiteBasis b = build_basis(3, 6, 7);
  LinearizedOperator op = assemble_L(b, maxwell(0.5));
  apply_split(op);
  Eigen::JacobiSVD<Mat> svd(op.K);
  const Vec sv = svd.singularValues();
  CHECK(sv(5) / sv(0) <= 1e-10);
  CHECK(sv(4) / sv(0) > 1e-3);
  CHECK((op.A - op.K + op.L).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(op.nu0_disc > 0.0);
  CHECK(op.nu1_disc <= 0.5 * op.nu0_disc);
  CHECK_THROWS_AS(split_AK(op.L, b, -2.0, 0.5), ConfigError);
  // A sign error in L makes A indefinite.
  CHECK_THROWS_AS(split_AK(Mat(-op.L), b, 0.0, 0.5), NumericalError);
}

TEST_CASE("Dirichlet form agrees with a brute-force weak form (cutoff)") {
  for (int N : {2, 3}) {
    const HermiteBasis b = build_basis(3, N, N + 1);
    const int nb = b.size();
    const std::vector<double> G = weak_form_tensor(b);
    auto g = [&](int a, int bb, int c) { return G[(static_cast<size_t>(a) * nb + bb) * nb + c]; };

    Mat Lref(nb, nb);
    for (int c = 0; c < nb; ++c)
      for (int bb = 0; bb < nb; ++bb) Lref(c, bb) = g(0, bb, c) + g(bb, 0, c);
    CHECK((Lref - Lref.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    const Mat Ld = assemble_L_dirichlet(b, cutoff_kernel(CollisionBackend::dirichlet_quadrature), {});
    const Mat Lm = assemble_L(b, cutoff_kernel(CollisionBackend::maxwell_diagonal)).L;
    INFO("N = " << N);
    CHECK((Ld - Lref).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((Lm - Lref).cwiseAbs().maxCoeff() < 1e-8);

    const Mat Gs = assemble_gamma_raw(b, cutoff_kernel(CollisionBackend::dirichlet_quadrature), {});
    double worst = 0.0;
    for (int a = 0; a < nb; ++a)
      for (int bb = 0; bb < nb; ++bb)
        for (int c = 0; c < nb; ++c)
          worst = std::max(worst, std::abs(Gs(a * nb + bb, c) - 0.5 * (g(a, bb, c) + g(bb, a, c))));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("Dirichlet backend matches the Maxwell backend for the singular kernel") {
  const HermiteBasis b = build_basis(3, 3, 4);
  CollisionKernelSpec k = maxwell(0.5);
  k.backend = CollisionBackend::dirichlet_quadrature;
  const LinearizedOperator d = assemble_L(b, k);
  CHECK(d.convergence.checked);
  CHECK(d.convergence.converged);
  const LinearizedOperator m = assemble_L(b, maxwell(0.5));
  CHECK((d.L - m.L).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("bilinear collision tensor") {
  const HermiteBasis b = build_basis(3, 3, 4);
  CollisionKernelSpec k = maxwell(0.5);
  k.backend = CollisionBackend::dirichlet_quadrature;
  const GammaTensor gam = assemble_gamma_tensor(b, k);
  const int nb = b.size();
  CHECK(gam.convergence.converged);
  CHECK(gam.invariance_defect(b) <= 1e-6);

  // For gamma = 0, (Gamma(phi_a, phi_b), phi_c) vanishes when |a| + |b| > |c|.
  double offdeg = 0.0;
  for (int a = 0; a < nb; ++a)
    for (int c2 = 0; c2 < nb; ++c2)
      for (int c = 0; c < nb; ++c)
        if (b.degree(a) + b.degree(c2) > b.degree(c)) offdeg = std::max(offdeg, std::abs(gam(a, c2, c)));
  CHECK(offdeg < 1e-6 * gam.data.cwiseAbs().maxCoeff());

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Vec f(nb), g(nb);
  for (int i = 0; i < nb; ++i) {
    f(i) = nd(rng);
    g(i) = nd(rng);
  }
  CHECK(gam.apply(f, Vec(Vec::Zero(nb))).norm() == 0.0);
  CHECK((gam.apply(f, g) - gam.apply(g, f)).norm() < 1e-12 * gam.apply(f, g).norm());
  const Mat Psi = kernel_vectors(b).columns;
  CHECK((Psi.transpose() * gam.apply(f, g)).cwiseAbs().maxCoeff() < 1e-6 * gam.apply(f, g).norm());

  // L f = Gamma(mu^{1/2}, f) + Gamma(f, mu^{1/2}) = 2 Gamma_s(psi_0, f).
  const Mat L = assemble_L(b, maxwell(0.5)).L;
  const Vec psi0 = Vec::Unit(nb, 0);
  CHECK((2.0 * gam.apply(psi0, f) - L * f).cwiseAbs().maxCoeff() < 1e-4 * f.cwiseAbs().maxCoeff());

  const CVec fc = f.cast<cplx>() * cplx(0.0, 1.0);
  const CVec out = gam.apply(fc, g.cast<cplx>());
  CHECK((out.imag() - gam.apply(f, g)).norm() < 1e-12);
  CHECK(out.real().norm() == 0.0);
}

TEST_CASE("sigma-grid doubling") {
  CollisionGridParams p;
  const CollisionKernelSpec k = maxwell(0.5);
  const CollisionGridParams q = doubled_sigma_grid(p, k);
  CHECK(q.gl_per_panel == 2 * p.gl_per_panel);
  CHECK(q.theta_floor == doctest::Approx(0.5 * k.theta_floor));
}
