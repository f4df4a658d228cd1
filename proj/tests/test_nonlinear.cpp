#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "kspec/linalg.hpp"
#include "kspec/nonlinear.hpp"
#include "kspec/symbols.hpp"

using namespace kspec;

namespace {

struct Fixture {
  std::unique_ptr<DispersionContext> ctx;
  GammaTensor gam;
};

// Maxwell kernel at N = 4; the tensor goes through the quadrature backend.
const Fixture& fx() {
  static std::unique_ptr<Fixture> f;
  if (!f) {
    f = std::make_unique<Fixture>();
    const HermiteBasis b = build_basis(3, 4, 5);
    CollisionKernelSpec k;
    LinearizedOperator op = assemble_L(b, k);
    const WeightedGram g = weighted_gram(b, SymbolParams{}, 1);
    apply_split(op, &g.M_a);
    f->ctx = std::make_unique<DispersionContext>(make_dispersion_context(op, &g.M_a));
    k.backend = CollisionBackend::dirichlet_quadrature;
    AssemblyOptions ao;
    ao.check_convergence = false;
    f->gam = assemble_gamma_tensor(b, k, ao);
  }
  return *f;
}

int nb() { return static_cast<int>(fx().ctx->V1.rows()); }

}  // namespace

TEST_CASE("X-norm configuration and mode sets") {
  XNormConfig c;
  CHECK_NOTHROW(c.validate(3));
  c.m = 1.5;
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  c.m = 2.0;
  c.delta = -1.0;
  CHECK_THROWS_AS(c.validate(3), ConfigError);

  const ModeSet t = single_mode_triple(0.5);
  CHECK(t.y.size() == 3);
  CHECK(t.y(0) == -0.5);
  CHECK(t.y(1) == 0.0);
  CHECK(t.y(2) == 0.5);
  CHECK(periodic_box_1d_x(0.25, 8).y.size() == 17);
  CHECK_THROWS_AS(periodic_box_1d_x(0.25, 9), ConfigError);

  const CMat P = default_nonlinear_profile(periodic_box_1d_x(0.5, 3), 35, 4);
  for (int k = 0; k < 7; ++k) CHECK((P.col(k) - P.col(6 - k).conjugate()).norm() < 1e-15);
  CHECK(P.col(3).imag().norm() == 0.0);
}

TEST_CASE("X-norm quadratic form") {
  const DispersionContext& c = *fx().ctx;
  const ModeSet modes = single_mode_triple(0.5);
  const XNorm xn(c, modes, XNormConfig{});
  CHECK(xn.lyapunov_residual() < 1e-10);
  CHECK(xn.delta() > 0.0);
  CHECK(xn.value(CMat::Zero(nb(), 3)) == 0.0);

  // Eigenvector of B(y): int_0^inf |e^{lambda t}|^2 ||v||^2 dt = ||v||^2 / (-2 Re lambda).
  Eigen::ComplexEigenSolver<CMat> es(mode_matrix(c, 0.5));
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); j += 7) {
    const CVec v = es.eigenvectors().col(j);
    const double ref = v.squaredNorm() / (-2.0 * es.eigenvalues()(j).real());
    CHECK(xn.mode_integral(2, v) == doctest::Approx(ref).epsilon(1e-10));
  }

  // d/dtau ||e^{tau B} v||^2 at 0 equals 2 Re (B v, v).
  const CMat B = mode_matrix(c, 0.5);
  CVec v = CVec::LinSpaced(nb(), cplx(-1.0, 0.5), cplx(1.0, -0.2));
  const double h = 1e-5;
  const double fd = ((h * B).exp() * v).squaredNorm() - ((-h * B).exp() * v).squaredNorm();
  CHECK(fd / (2 * h) == doctest::Approx(2.0 * std::real(v.dot(B * v))).epsilon(1e-8));

  // Conservation: the linear propagator keeps kernel data at y = 0.
  const CMat E0 = (3.0 * mode_matrix(c, 0.0)).exp();
  for (int i = 0; i < 5; ++i) CHECK((E0 * c.Psi.col(i).cast<cplx>() - c.Psi.col(i).cast<cplx>()).norm() < 1e-12);
}

TEST_CASE("X-norm over radial modes is stable under refinement") {
  const DispersionContext& c = *fx().ctx;
  WholeSpaceProblem prob;
  prob.h = Vec::Unit(nb(), 0);
  auto value = [&](int per_panel) {
    prob.n_per_panel = per_panel;
    const ModeSet modes = radial_modes(prob);
    const XNorm xn(c, modes, XNormConfig{});
    CMat F(nb(), modes.y.size());
    for (Eigen::Index k = 0; k < modes.y.size(); ++k) F.col(k) = prob.g_hat(modes.y(k)) * prob.h.cast<cplx>();
    return xn.value(F);
  };
  const double a = value(8), b = value(16);
  CHECK(b == doctest::Approx(a).epsilon(0.05));
}

TEST_CASE("Gamma convolution over modes") {
  const Fixture& f = fx();
  const ModeSet modes = single_mode_triple(0.5);
  const CMat g = default_nonlinear_profile(modes, nb(), 1), h = default_nonlinear_profile(modes, nb(), 2);
  const CMat out = convolve_gamma(f.gam, modes, g, h);
  // Modes -y, 0, y: only sums landing back in the set contribute.
  const CVec c0 = f.gam.apply(CVec(g.col(0)), CVec(h.col(2))) + f.gam.apply(CVec(g.col(1)), CVec(h.col(1))) +
                  f.gam.apply(CVec(g.col(2)), CVec(h.col(0)));
  const CVec cm = f.gam.apply(CVec(g.col(0)), CVec(h.col(1))) + f.gam.apply(CVec(g.col(1)), CVec(h.col(0)));
  CHECK((out.col(1) - c0).norm() < 1e-12 * c0.norm());
  CHECK((out.col(0) - cm).norm() < 1e-12 * cm.norm());
  CHECK(convolve_gamma(f.gam, modes, CMat::Zero(nb(), 3), h).norm() == 0.0);
}

TEST_CASE("linear energy run") {
  const Fixture& f = fx();
  const ModeSet modes = single_mode_triple(0.5);
  const XNorm xn(*f.ctx, modes, XNormConfig{});
  const CMat P = default_nonlinear_profile(modes, nb(), 3);
  const CMat F0 = P / std::sqrt(xn.value(P));

  const EnergyRun free = linear_energy_run(xn, f.gam, nullptr, 1e-2 * F0, 0.05, 5.0);
  CHECK_FALSE(free.blew_up);
  CHECK(free.t.size() == 101);
  // Without forcing the X-norm decays and G never exceeds its initial value.
  for (size_t j = 1; j < free.G.size(); ++j) {
    CHECK(free.G[j] <= free.G[0]);
    CHECK(xn.instant(free.states[j]) <= xn.instant(free.states[j - 1]) * (1 + 1e-12));
  }
  CHECK(free.certificate <= 1.0);

  // Forcing by g of the same size: the bilinear term is quadratic, so the
  // final G relative to eps0^2 departs from its linear value at first order in eps.
  auto final_g = [&](double eps, double dt, bool forced) {
    const EnergyRun g = linear_energy_run(xn, f.gam, nullptr, eps * F0, dt, 5.0);
    if (!forced) return g.G.back() / g.eps0_sq;
    const EnergyRun r = linear_energy_run(xn, f.gam, &g.states, eps * F0, dt, 5.0);
    for (double c : r.step_gamma_constant) CHECK(std::isfinite(c));
    CHECK_FALSE(r.blew_up);
    return r.G.back() / r.eps0_sq;
  };
  const double lin = final_g(1.0, 0.05, false);
  const double d1 = final_g(0.4, 0.05, true) - lin, d2 = final_g(0.2, 0.05, true) - lin;
  CHECK(std::abs(d2) < std::abs(d1));
  CHECK(d2 / d1 == doctest::Approx(0.5).epsilon(0.2));

  // The splitting is at least first order: successive dt halvings shrink the
  // change in the forced energy by a factor of two or more.
  const double c1 = final_g(1.0, 0.05, true), c2 = final_g(1.0, 0.025, true), c3 = final_g(1.0, 0.0125, true),
               c4 = final_g(1.0, 0.00625, true);
  MESSAGE("forced energy " << c1 << " " << c2 << " " << c3 << " " << c4);
  CHECK(std::abs(c1 - c2) >= 1.8 * std::abs(c2 - c3));
  CHECK(std::abs(c2 - c3) >= 1.8 * std::abs(c3 - c4));
}

TEST_CASE("Picard iteration") {
  const Fixture& f = fx();
  const ModeSet modes = single_mode_triple(0.5);
  const XNorm xn(*f.ctx, modes, XNormConfig{});
  const PicardResult zero = picard_solve(xn, f.gam, CMat::Zero(nb(), 3), 0.05, 5.0, 4);
  for (double g : zero.G_diff) CHECK(g == 0.0);
  for (const CMat& s : zero.solution.states) CHECK(s.norm() == 0.0);

  const CMat P = default_nonlinear_profile(modes, nb(), 7);
  const CMat F0 = 0.3 * P / std::sqrt(xn.value(P));
  const PicardResult res = picard_solve(xn, f.gam, F0, 0.05, 5.0, 6);
  CHECK(res.contracted);
  for (double r : res.ratios) CHECK(r <= 0.5);
  CHECK(std::isfinite(res.C_double_prime));
  CHECK(res.C_double_prime > 0.0);
  // log G(d^n) is affine in n with a negative slope.
  std::vector<double> n, lg;
  for (size_t i = 0; i < res.G_diff.size(); ++i)
    if (res.G_diff[i] > 1e-300) {
      n.push_back(double(i));
      lg.push_back(std::log(res.G_diff[i]));
    }
  REQUIRE(n.size() >= 4);
  const LineFit lf = fit_line(n, lg);
  CHECK(lf.slope < 0.0);
  CHECK(lf.r2 >= 0.95);
}

TEST_CASE("small-data threshold") {
  const Fixture& f = fx();
  const ModeSet modes = single_mode_triple(0.5);
  const XNorm xn(*f.ctx, modes, XNormConfig{});
  const CMat P = default_nonlinear_profile(modes, nb(), 7);
  const ThresholdResult a = epsilon_threshold(xn, f.gam, P, 0.05, 10.0);
  CHECK(a.eps_star > 0.0);
  CHECK(a.eps_fail / a.eps_star <= 1.02 + 1e-12);
  CHECK(a.below.contracted);
  CHECK_FALSE(a.above.contracted);
  const ThresholdResult b = epsilon_threshold(xn, f.gam, P, 0.025, 10.0);
  MESSAGE("threshold " << a.eps_star << " (dt 0.05), " << b.eps_star << " (dt 0.025)");
  CHECK(b.eps_star / a.eps_star <= 2.0);
  CHECK(b.eps_star / a.eps_star >= 0.5);
}
