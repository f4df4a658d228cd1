// SPDX-License-Identifier: Apache-2.0
#include "kspec/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "kspec/linalg.hpp"

namespace kspec {

void XNormConfig::validate(int d) const {
  if (delta < 0.0) throw ConfigError("x_norm: delta must be positive (0 selects the default)");
  if (!(m > 0.5 * d)) throw ConfigError("x_norm: m must exceed d/2");
}

ModeSet single_mode_triple(double spacing) {
  if (!(spacing > 0.0)) throw ConfigError("single_mode_triple: spacing must be positive");
  return {"single_mode_triple", (Vec(3) << -spacing, 0.0, spacing).finished(), Vec::Ones(3)};
}

ModeSet periodic_box_1d_x(double spacing, int K) {
  if (!(spacing > 0.0) || K < 1 || K > 8) throw ConfigError("periodic_box_1d_x: need spacing > 0 and 1 <= K <= 8");
  ModeSet ms{"periodic_box_1d_x", Vec(2 * K + 1), Vec::Ones(2 * K + 1)};
  for (int k = -K; k <= K; ++k) ms.y(k + K) = spacing * k;
  return ms;
}

ModeSet radial_modes(const WholeSpaceProblem& prob) {
  const RadialRule rr = radial_rule(prob);
  return {"radial", rr.y, rr.w};
}

CMat mode_matrix(const DispersionContext& ctx, double y) {
  return cplx(0.0, -2.0 * pi * y) * ctx.V1.cast<cplx>() + ctx.op.L.cast<cplx>();
}

XNorm::XNorm(const DispersionContext& ctx, const ModeSet& modes, const XNormConfig& cfg)
    : ctx_(&ctx), modes_(modes), cfg_(cfg) {
  cfg.validate(ctx.op.basis.dim_v);
  if (modes.y.size() != modes.w.size() || modes.y.size() == 0) throw ConfigError("x_norm: empty or mismatched modes");
  delta_ = cfg.delta;
  if (delta_ == 0.0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(ctx.op.K, Eigen::EigenvaluesOnly);
    delta_ = 1.0 / (4.0 * es.eigenvalues().maxCoeff());
  }
  const Eigen::Index nb = ctx.V1.rows();
  sob_.resize(modes.y.size());
  for (Eigen::Index k = 0; k < modes.y.size(); ++k) {
    const double y = modes.y(k);
    sob_(k) = modes.w(k) * std::pow(1.0 + y * y, cfg.m);
    const CMat B = mode_matrix(ctx, y);
    if (y == 0.0) {
      const CMat U1 = ctx.U1.cast<cplx>();
      const CMat Br = U1.adjoint() * B * U1;
      const CMat Gr = solve_lyapunov(Br, CMat::Identity(Br.rows(), Br.cols()));
      G_.push_back(U1 * Gr * U1.adjoint());
      lyap_residual_ = std::max(lyap_residual_, (Br.adjoint() * Gr + Gr * Br + CMat::Identity(Br.rows(), Br.cols())).norm());
      continue;
    }
    const double absc = B.eigenvalues().real().maxCoeff();
    if (!(absc < 0.0)) throw NumericalError("x_norm: mode y = " + std::to_string(y) + " has spectral abscissa >= 0");
    const CMat G = solve_lyapunov(B, CMat::Identity(nb, nb));
    const double res = (B.adjoint() * G + G * B + CMat::Identity(nb, nb)).norm();
    lyap_residual_ = std::max(lyap_residual_, res);
    if (res > cfg.lyapunov_tol * std::max(1.0, G.norm()) * nb)
      throw NumericalError("x_norm: Lyapunov residual " + std::to_string(res) + " above tolerance");
    G_.push_back(0.5 * (G + G.adjoint()));
  }
}

double XNorm::l2hm(const CMat& F) const {
  double s = 0.0;
  for (Eigen::Index k = 0; k < F.cols(); ++k) s += sob_(k) * F.col(k).squaredNorm();
  return s;
}

double XNorm::instant(const CMat& F) const { return delta_ * l2hm(F); }

double XNorm::weighted(const CMat& F) const {
  const CMat Ra = ctx_->R_a.cast<cplx>();
  double s = 0.0;
  for (Eigen::Index k = 0; k < F.cols(); ++k) s += sob_(k) * (Ra * F.col(k)).squaredNorm();
  return s;
}

double XNorm::value(const CMat& F) const {
  if (F.cols() != modes_.y.size()) throw ConfigError("x_norm: state has the wrong number of modes");
  double s = instant(F);
  for (Eigen::Index k = 0; k < F.cols(); ++k) s += sob_(k) * mode_integral(static_cast<int>(k), F.col(k));
  return s;
}

namespace {

// Index of mode y_a + y_b in the set, or -1 when it falls outside.
std::vector<std::vector<std::pair<int, int>>> convolution_pairs(const ModeSet& modes) {
  const Eigen::Index n = modes.y.size();
  std::vector<std::vector<std::pair<int, int>>> pairs(n);
  const double tol = 1e-9 * (1.0 + modes.y.cwiseAbs().maxCoeff());
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const double y = modes.y(a) + modes.y(b);
      for (Eigen::Index k = 0; k < n; ++k)
        if (std::abs(modes.y(k) - y) < tol) pairs[k].push_back({static_cast<int>(a), static_cast<int>(b)});
    }
  return pairs;
}

}  // namespace

CMat convolve_gamma(const GammaTensor& gam, const ModeSet& modes, const CMat& g, const CMat& f) {
  const auto pairs = convolution_pairs(modes);
  const Eigen::Index nb = gam.nb;
  CMat out = CMat::Zero(nb, modes.y.size());
  for (size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].empty()) continue;
    // Sum the outer products first; the contraction is linear in them.
    CMat fg = CMat::Zero(nb, nb);
    for (auto [a, b] : pairs[k]) fg.noalias() += f.col(b) * g.col(a).transpose();
    const Eigen::Map<const CVec> x(fg.data(), fg.size());
    out.col(k).real() = gam.data.transpose() * x.real();
    out.col(k).imag() = gam.data.transpose() * x.imag();
  }
  return out;
}

EnergyRun linear_energy_run(const XNorm& xn, const GammaTensor& gam, const std::vector<CMat>* g, const CMat& F0,
                            double dt, double T) {
  if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("linear_energy_run: dt and T must be positive");
  const DispersionContext& ctx = xn.ctx();
  const ModeSet& modes = xn.modes();
  const Eigen::Index nm = modes.y.size();
  const int steps = static_cast<int>(std::lround(T / dt));
  if (g && static_cast<int>(g->size()) < steps + 1) throw ConfigError("linear_energy_run: g trajectory too short");
  std::vector<CMat> E(nm);
  for (Eigen::Index k = 0; k < nm; ++k) E[k] = (dt * mode_matrix(ctx, modes.y(k))).exp();

  EnergyRun run;
  run.eps0_sq = xn.value(F0);
  if (g) {
    double supg = 0.0;
    for (const CMat& gs : *g) supg = std::max(supg, xn.instant(gs));
    if (supg > 2.0 * run.eps0_sq * (1.0 + 1e-12) && run.eps0_sq > 0.0)
      run.warnings.push_back("input g exceeds the 2 eps0^2 energy bound");
  }
  const double nu0 = ctx.op.nu0_disc;
  double integral = 0.0;
  CMat F = F0;
  double w_prev = xn.weighted(F);
  auto record = [&](double t, const CMat& state, double wnow) {
    run.t.push_back(t);
    run.states.push_back(state);
    const double Gv = xn.instant(state) + 2.0 * xn.delta() * nu0 * integral;
    run.G.push_back(Gv);
    run.norm_l2hm.push_back(xn.l2hm(state));
    run.norm_weighted.push_back(wnow);
  };
  record(0.0, F, w_prev);
  for (int j = 0; j < steps; ++j) {
    CMat rhs = F;
    double cstep = 0.0;
    if (g) {
      const CMat Gm = convolve_gamma(gam, modes, (*g)[j], F);
      rhs += dt * Gm;
      // |(Gamma(g, f), f)| relative to ||g||_{L2 H^m} ||f||_a^2.
      double pair = 0.0;
      for (Eigen::Index k = 0; k < nm; ++k)
        pair += std::pow(1.0 + modes.y(k) * modes.y(k), xn.m()) * modes.w(k) * std::real(F.col(k).dot(Gm.col(k)));
      const double den = std::sqrt(xn.l2hm((*g)[j])) * w_prev;
      if (den > 0.0) cstep = std::abs(pair) / den;
    }
    CMat Fn(F.rows(), nm);
    for (Eigen::Index k = 0; k < nm; ++k) Fn.col(k) = E[k] * rhs.col(k);
    const double w_now = xn.weighted(Fn);
    integral += 0.5 * dt * (w_prev + w_now);
    const double Gold = run.G.back();
    F = Fn;
    w_prev = w_now;
    record((j + 1) * dt, F, w_now);
    run.step_gamma_constant.push_back(cstep);
    if (!std::isfinite(run.G.back()) || (Gold > 0.0 && run.G.back() > 2.0 * Gold)) {
      run.blew_up = true;
      run.warnings.push_back("energy doubled within one step at t = " + std::to_string((j + 1) * dt));
      break;
    }
  }
  double mx = 0.0;
  for (double v : run.G) mx = std::max(mx, v);
  run.certificate = run.eps0_sq > 0.0 ? mx / (2.0 * run.eps0_sq) : 0.0;
  return run;
}

namespace {

double sup_G_diff(const XNorm& xn, const EnergyRun& a, const std::vector<CMat>* b, double dt) {
  // G(d) along the trajectory of d = a - b, including the time integral.
  const double nu0 = xn.ctx().op.nu0_disc;
  double integral = 0.0, sup = 0.0, w_prev = 0.0;
  for (size_t j = 0; j < a.states.size(); ++j) {
    const CMat d = b ? CMat(a.states[j] - (*b)[j]) : a.states[j];
    const double w = xn.weighted(d);
    if (j > 0) integral += 0.5 * dt * (w_prev + w);
    w_prev = w;
    sup = std::max(sup, xn.instant(d) + 2.0 * xn.delta() * nu0 * integral);
  }
  return sup;
}

}  // namespace

PicardResult picard_solve(const XNorm& xn, const GammaTensor& gam, const CMat& F0, double dt, double T, int n_iter,
                          double tol) {
  if (n_iter < 2) throw ConfigError("picard_solve: need at least two iterations");
  PicardResult res;
  res.eps0 = std::sqrt(xn.value(F0));
  const int steps = static_cast<int>(std::lround(T / dt));
  std::vector<CMat> prev(steps + 1, CMat::Zero(F0.rows(), F0.cols()));  // f^0 = 0
  bool ok = true;
  EnergyRun cur;
  for (int n = 0; n < n_iter; ++n) {
    cur = linear_energy_run(xn, gam, &prev, F0, dt, T);
    if (cur.blew_up || cur.states.size() != prev.size()) {
      ok = false;
      break;
    }
    const double gd = sup_G_diff(xn, cur, n == 0 ? nullptr : &prev, dt);
    res.G_diff.push_back(gd);
    if (n > 0) {
      const double rho = res.G_diff[n - 1] > 0.0 ? gd / res.G_diff[n - 1] : 0.0;
      res.ratios.push_back(rho);
      if (!(rho <= 0.5)) ok = false;
    }
    prev = cur.states;
    if (!ok) break;
    if (res.G_diff[0] == 0.0 || gd < tol * res.G_diff[0]) {
      res.converged = true;
      break;
    }
  }
  res.contracted = ok;
  res.solution = cur;
  if (ok && res.eps0 > 0.0) {
    double sup_l2 = 0.0;
    for (double v : cur.norm_l2hm) sup_l2 = std::max(sup_l2, std::sqrt(v));
    double integral = 0.0;
    for (size_t j = 1; j < cur.norm_weighted.size(); ++j)
      integral += 0.5 * dt * (cur.norm_weighted[j - 1] + cur.norm_weighted[j]);
    res.C_double_prime = (sup_l2 + std::sqrt(integral)) / res.eps0;
  }
  return res;
}

ThresholdResult epsilon_threshold(const XNorm& xn, const GammaTensor& gam, const CMat& profile, double dt, double T,
                                  int n_iter, double rel_tol) {
  const double pn = std::sqrt(xn.value(profile));
  if (!(pn > 0.0)) throw ConfigError("epsilon_threshold: profile has zero X-norm");
  const CMat unit = profile / pn;
  auto success = [&](double eps) { return picard_solve(xn, gam, eps * unit, dt, T, n_iter).contracted; };
  ThresholdResult out;
  double lo = 1e-3, hi = 0.0;
  // Bracket the threshold.
  while (!success(lo)) {
    hi = lo;
    lo /= 4.0;
    if (++out.iterations > 40) throw NumericalError("epsilon_threshold: no contracting scale found");
  }
  if (hi == 0.0) {
    hi = lo * 4.0;
    while (success(hi)) {
      lo = hi;
      hi *= 4.0;
      if (++out.iterations > 40) throw NumericalError("epsilon_threshold: no failing scale found");
    }
  }
  while (hi / lo > 1.0 + rel_tol) {
    const double mid = std::sqrt(lo * hi);
    (success(mid) ? lo : hi) = mid;
    ++out.iterations;
  }
  out.eps_star = lo;
  out.eps_fail = hi;
  out.below = picard_solve(xn, gam, 0.5 * lo * unit, dt, T, n_iter);
  out.above = picard_solve(xn, gam, 2.0 * lo * unit, dt, T, n_iter);
  return out;
}

CMat default_nonlinear_profile(const ModeSet& modes, int nb, unsigned long long seed) {
  const Eigen::Index nm = modes.y.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  CMat F = CMat::Zero(nb, nm);
  std::map<int, int> done;
  for (Eigen::Index k = 0; k < nm; ++k) {
    // Partner with the mode at -y.
    Eigen::Index partner = -1;
    for (Eigen::Index q = 0; q < nm; ++q)
      if (std::abs(modes.y(q) + modes.y(k)) < 1e-12) partner = q;
    if (partner < k && partner >= 0) {
      F.col(k) = F.col(partner).conjugate();
      continue;
    }
    for (int i = 0; i < nb; ++i) {
      const double re = nd(rng);
      const double im = partner == k ? 0.0 : nd(rng);
      F(i, k) = cplx(re, im);
    }
  }
  return F;
}

}  // namespace kspec
