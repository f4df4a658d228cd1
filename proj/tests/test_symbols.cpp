#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

#include "kspec/norms.hpp"
#include "kspec/symbols.hpp"
#include "oracles.hpp"

using namespace kspec;

namespace {

SymbolGrid grid1d(int n, double ext) {
  SymbolGrid g;
  g.dim = 1;
  g.n_points = n;
  g.v_extent = ext;
  return g;
}

double lambda_min(const Mat& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

TEST_CASE("symbol values") {
  const double z[3] = {0, 0, 0};
  CHECK(eval_symbol_a(z, z, 3, 0.0, 0.5, 10.0) == doctest::Approx(11.0));
  const double v0 = 0.0, eta = 2.0;
  CHECK(eval_symbol_a(&v0, &eta, 1, 1.0, 0.5, 1.0) == doctest::Approx(std::sqrt(5.0) + 1.0).epsilon(1e-12));

  // The wedge term: eta parallel to v contributes nothing, orthogonal gives |eta|^2 |v|^2.
  const double v[3] = {2, 0, 0}, par[3] = {1, 0, 0}, orth[3] = {0, 1, 0};
  const double base = std::pow(1 + 1 + 4, 0.5) + 10.0 * std::sqrt(5.0);
  CHECK(eval_symbol_a(v, par, 3, 0.0, 0.5, 10.0) == doctest::Approx(base).epsilon(1e-12));
  CHECK(eval_symbol_a(v, orth, 3, 0.0, 0.5, 10.0) == doctest::Approx(std::sqrt(10.0) + 10.0 * std::sqrt(5.0)).epsilon(1e-12));

  double prev = 0.0;
  for (double r = 0.0; r < 20.0; r += 0.37) {
    const double e[3] = {0.6 * r, 0.8 * r, 0.0}, w[3] = {0.3, -1.1, 0.4};
    const double a = eval_symbol_a(w, e, 3, 1.0, 0.3, 2.0);
    CHECK(a >= prev);
    prev = a;
  }
}

TEST_CASE("phase-space grid") {
  SymbolGrid g = grid1d(32, 6.0);
  CHECK_NOTHROW(g.validate());
  CHECK(g.dv() * g.deta() * g.n_points == doctest::Approx(1.0));
  g.dim = 3;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = grid1d(31, 6.0);
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("Weyl quantization of simple symbols") {
  const SymbolGrid g = grid1d(64, 8.0);
  const int n = g.size();
  const CMat I = weyl_quantize(g, [](const double*, const double*) { return 1.0; });
  CHECK((I - CMat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-8);

  // Symbol eta is (1 / 2 pi i) d/dv; checked against the analytic derivative of a
  // Gaussian and exactly on a grid Fourier mode.
  const CMat D = weyl_quantize(g, [](const double*, const double* e) { return e[0]; });
  const Vec v = g.v_axis();
  CVec f(n), df(n);
  const std::complex<double> i2pi(0.0, 2.0 * pi);
  for (int j = 0; j < n; ++j) {
    f(j) = std::exp(-v(j) * v(j));
    df(j) = -2.0 * v(j) * std::exp(-v(j) * v(j)) / i2pi;
  }
  CHECK((D * f - df).cwiseAbs().maxCoeff() < 1e-6);
  const double eta_p = 5 * g.deta();
  for (int j = 0; j < n; ++j) f(j) = std::exp(i2pi * eta_p * v(j));
  CHECK((D * f - eta_p * f).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("real symbols quantize to Hermitian matrices") {
  for (int dim : {1, 2}) {
    SymbolGrid g;
    g.dim = dim;
    g.n_points = dim == 1 ? 48 : 12;
    g.v_extent = 4.0;
    const CMat A = weyl_quantize(g, [dim](const double* v, const double* e) {
      return eval_symbol_a(v, e, dim, 1.0, 0.5, 3.0) * std::exp(-0.1 * (v[0] * v[0] + e[0] * e[0]));
    });
    CHECK((A - A.adjoint()).cwiseAbs().maxCoeff() < 1e-10 * A.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("boundary truncation warning") {
  const SymbolGrid g = grid1d(64, 6.0);
  Diagnostics quiet, loud;
  weyl_quantize(g, [](const double* v, const double* e) { return std::exp(-v[0] * v[0] - e[0] * e[0]); }, &quiet);
  CHECK(quiet.warnings.empty());
  weyl_quantize(g, [](const double* v, const double* e) { return 1.0 + v[0] * v[0] + e[0] * e[0]; }, &loud);
  CHECK(!loud.warnings.empty());
}

TEST_CASE("weighted Gram matrix") {
  const HermiteBasis b = build_basis(3, 4, 5);
  const int nb = b.size();

  // s -> 0 with gamma = 0: a -> 1 + K0.
  const WeightedGram flat = weighted_gram(b, SymbolParams{0.0, 1e-3, 10.0}, 1);
  CHECK((flat.M_a - 11.0 * Mat::Identity(nb, nb)).cwiseAbs().maxCoeff() <= 0.05 * 11.0);

  const WeightedGram W = weighted_gram(b, SymbolParams{0.0, 0.5, 10.0}, 1);
  CHECK((W.M_a - W.M_a.transpose()).cwiseAbs().maxCoeff() < 1e-10 * W.M_a.cwiseAbs().maxCoeff());
  CHECK(W.lambda_min > 0.0);
  CHECK((W.M_a * W.M_a_inv_gram - Mat::Identity(nb, nb)).cwiseAbs().maxCoeff() < 1e-8);

  // (a^{1/2})^w (a^{-1/2})^w = 1 only up to lower-order symbol terms; the residual
  // is a property of the symbols and must not move under grid refinement.
  GalerkinSymbolOptions fine;
  fine.n_x = fine.n_eta = 18;
  fine.pad = 4;
  auto residual = [&](const GalerkinSymbolOptions& o) {
    const Mat P = weighted_gram(b, SymbolParams{0.0, 0.5, 10.0}, 1, o).M_a;
    const Mat M = weighted_gram(b, SymbolParams{0.0, 0.5, 10.0}, -1, o).M_a;
    return (P * M - Mat::Identity(nb, nb)).norm() / std::sqrt(double(nb));
  };
  const double r0 = residual({}), r1 = residual(fine);
  MESSAGE("composition residual " << r0 << " -> " << r1);
  CHECK(r0 < 0.25);
  CHECK(std::abs(r1 - r0) < 0.02);
}

TEST_CASE("positivity sweep for K0 >= 1") {
  const HermiteBasis b = build_basis(3, 4, 5);
  double margin = 1e300;
  for (double K0 : {1.0, 2.0, 5.0})
    for (auto [g, s] : {std::pair{0.0, 0.1}, {0.0, 0.9}, {1.0, 0.5}, {-0.5, 0.3}}) {
      const double lm = weighted_gram(b, SymbolParams{g, s, K0}, 1).lambda_min;
      CHECK(lm >= 1.0);
      margin = std::min(margin, lm - 1.0);
    }
  MESSAGE("smallest margin over the sweep " << margin);
}

TEST_CASE("K0 bisection") {
  const HermiteBasis b = build_basis(3, 2, 3);
  const K0Search r = find_K0_min(b, SymbolParams{0.0, 0.5, 10.0}, {}, 5.0, 100.0, 1e-3);
  CHECK(r.K0_min > 0.0);
  CHECK(r.lambda_at_min >= 5.0);
  CHECK(r.lambda_at_min < 5.05);
  const double below = weighted_gram(b, SymbolParams{0.0, 0.5, r.K0_min - 0.01}, 1).lambda_min;
  CHECK(below < 5.0);
}

TEST_CASE("triple norm") {
  const HermiteBasis b = build_basis(3, 3, 4);
  const int nb = b.size();
  CollisionKernelSpec k;
  const TripleNormParts T = triple_norm_matrix(b, k, default_triple_grid(3));
  CHECK(triple_norm(Vec::Zero(nb), T.total()) == 0.0);
  CHECK(lambda_min(T.total()) > -1e-10 * T.total().norm());
  CHECK(lambda_min(T.first) > -1e-10 * T.first.norm());
  CHECK(lambda_min(T.second) > -1e-10 * T.second.norm());

  // For f = psi_0 both terms reduce to int B mu_* ((mu')^{1/2} - mu^{1/2})^2.
  const Vec psi0 = Vec::Unit(nb, 0);
  const double t1 = psi0.dot(T.first * psi0), t2 = psi0.dot(T.second * psi0);
  CHECK(t2 > 0.0);
  CHECK(t1 == doctest::Approx(t2).epsilon(1e-6));

  CollisionGridParams g2 = default_triple_grid(3);
  g2 = doubled_sigma_grid(g2, k);
  ++g2.n_center;
  const TripleNormParts T2 = triple_norm_matrix(b, k, g2);
  MESSAGE("|||psi_0|||^2 = " << psi0.dot(T.total() * psi0) << " and " << psi0.dot(T2.total() * psi0));
  CHECK(psi0.dot(T2.total() * psi0) == doctest::Approx(t1 + t2).epsilon(1e-3));
}

TEST_CASE("N^{s,gamma} norm") {
  const HermiteBasis b = build_basis(3, 3, 4);
  const int nb = b.size();
  for (auto [g, s] : {std::pair{0.0, 0.5}, {1.0, 0.25}}) {
    const NsgParts P = nsg_norm_matrix(b, g, s);
    CHECK(nsg_norm(Vec::Zero(nb), P.total()) == 0.0);
    // ||<v>^{gamma/2+s} mu^{1/2}||^2 = int <v>^{gamma+2s} mu, radial oracle.
    const double p = g + 2 * s;
    const double ref = 4.0 * pi * std::pow(2.0 * pi, -1.5) *
                       oracle::graded_integral([p](double r) { return std::pow(1 + r * r, 0.5 * p) * r * r * std::exp(-0.5 * r * r); },
                                               0.0, 14.0, 1, 0.5, 80);
    const Vec psi0 = Vec::Unit(nb, 0);
    CHECK(psi0.dot(P.weight * psi0) == doctest::Approx(ref).epsilon(1e-8));
    CHECK(psi0.dot(P.singular * psi0) > 0.0);

    Vec f = Vec::LinSpaced(nb, -1.0, 1.0);
    CHECK(nsg_norm(3.0 * f, P.total()) == doctest::Approx(9.0 * nsg_norm(f, P.total())).epsilon(1e-12));
  }
  const double sens = nsg_floor_sensitivity(b, 0.0, 0.5);
  MESSAGE("diag_floor halving changes the matrix by " << sens);
  CHECK(sens < 0.05);
}

TEST_CASE("norm equivalence report") {
  const int N = 3;
  const HermiteBasis b = build_basis(3, N, N + 1);
  CollisionKernelSpec k;
  const double l = k.gamma / 2 + k.s;
  auto build = [&](bool refined) {
    GalerkinSymbolOptions go;
    CollisionGridParams tg = default_triple_grid(N);
    NsgOptions no;
    if (refined) {
      go.n_x = go.n_eta = 18;
      go.pad = 4;
      tg = doubled_sigma_grid(tg, k);
      ++tg.n_center;
      no.n_v = no.n_polar = N + 6;
      no.n_azimuth = 2 * N + 12;
      no.gl_per_panel = 4;
    }
    const Mat L = assemble_L(b, k).L;
    return NormMatrices{weighted_gram(b, SymbolParams{k.gamma, k.s, 10.0}, 1, go).M_a,
                        triple_norm_matrix(b, k, tg).total(), nsg_norm_matrix(b, k.gamma, k.s, no).total(),
                        Mat(-L + weight_matrix(b, 2 * l))};
  };
  const NormMatrices m0 = build(false);
  const auto family = default_norm_family(b, 1);
  REQUIRE(family.size() > 5);

  std::vector<NormFamilyMember> zero{{"zero", Vec::Zero(b.size())}};
  const NormEquivalenceReport z = norm_equivalence_report(zero, m0, l);
  CHECK(z.rows[0].norm_a == 0.0);
  CHECK(z.rows[0].norm_triple == 0.0);
  CHECK(z.rows[0].norm_nsg == 0.0);
  CHECK(z.rows[0].norm_dirichlet_plus_weight == 0.0);

  // Kernel members: the Dirichlet part vanishes and only the weight term remains.
  const Mat Psi = kernel_vectors(b).columns;
  for (int i = 0; i < Psi.cols(); ++i) {
    const Vec f = Psi.col(i);
    const double dw = f.dot(m0.dirichlet_plus_weight * f), w = f.dot(weight_matrix(b, 2 * l) * f);
    CHECK(dw == doctest::Approx(w).epsilon(1e-10));
    CHECK(dw > 0.0);
  }

  const NormEquivalenceReport r0 = norm_equivalence_report(family, m0, l);
  for (const NormRow& row : r0.rows) {
    CHECK(row.norm_a > 0.0);
    CHECK(row.norm_triple > 0.0);
    CHECK(row.norm_nsg > 0.0);
    CHECK(row.norm_dirichlet_plus_weight > 0.0);
  }
  for (const auto& [key, r] : r0.ratios) {
    CHECK(std::isfinite(r.max));
    CHECK(r.min > 0.0);
  }
  const NormEquivalenceReport r1 = norm_equivalence_report(family, build(true), l);
  const double drift = ratio_drift(r0, r1);
  MESSAGE("ratio drift under refinement " << drift);
  CHECK(drift <= 0.2);
}
