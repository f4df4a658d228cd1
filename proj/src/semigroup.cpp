// SPDX-License-Identifier: Apache-2.0
#include "kspec/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "kspec/linalg.hpp"
#include "kspec/quadrature.hpp"

namespace kspec {

namespace {
const cplx I1(0.0, 1.0);

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double sphere_area(int d) { return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d); }
}  // namespace

CVec propagate_expm(const FourierModeOperator& mode, const CVec& f0, double t) {
  if (t < 0.0) throw ConfigError("propagate_expm: t must be nonnegative");
  if (t == 0.0) return f0;
  const CMat E = (t * mode.B_hat).exp();
  return E * f0;
}

ContourResult propagate_contour(const FourierModeOperator& mode, const CVec& f0, const PropagatorConfig& cfg) {
  if (cfg.k_ibp < 2) throw ConfigError("propagate_contour: k_ibp must be at least 2");
  if (cfg.times.empty()) throw ConfigError("propagate_contour: no times given");
  for (double t : cfg.times)
    if (!(t > 0.0)) throw ConfigError("propagate_contour: times must be positive");
  const CMat& B = mode.B_hat;
  const Eigen::Index n = B.rows();
  const int k = cfg.k_ibp;

  Eigen::ComplexEigenSolver<CMat> es(B);
  const CVec& ev = es.eigenvalues();
  std::vector<double> re(n);
  for (Eigen::Index i = 0; i < n; ++i) re[i] = ev(i).real();
  std::sort(re.begin(), re.end(), std::greater<double>());

  ContourResult res;
  res.times = cfg.times;
  if (std::isnan(cfg.sigma2)) {
    // Widest gap among 0 and the rightmost real parts.
    std::vector<double> top{0.0};
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(n, 8); ++i) top.push_back(std::min(0.0, re[i]));
    double best = -1.0;
    for (size_t i = 0; i + 1 < top.size(); ++i)
      if (top[i] - top[i + 1] > best) {
        best = top[i] - top[i + 1];
        res.sigma = -0.5 * (top[i] + top[i + 1]);
      }
  } else {
    res.sigma = cfg.sigma2;
  }
  res.distance = 1e300;
  for (Eigen::Index i = 0; i < n; ++i) res.distance = std::min(res.distance, std::abs(ev(i).real() + res.sigma));
  if (!(res.distance > 1e-12)) throw NumericalError("propagate_contour: an eigenvalue lies on the contour");
  if (!(res.sigma > 0.0)) throw ConfigError("propagate_contour: the line must lie left of the origin");

  // Residues of the eigenvalues right of the line. B is complex symmetric, so
  // the spectral projector onto their span is V (V^T V)^{-1} V^T.
  std::vector<Eigen::Index> right;
  for (Eigen::Index i = 0; i < n; ++i)
    if (ev(i).real() > -res.sigma) right.push_back(i);
  res.n_residues = static_cast<int>(right.size());
  CMat Vr(n, right.size());
  CVec lr(right.size());
  for (size_t j = 0; j < right.size(); ++j) {
    Vr.col(j) = es.eigenvectors().col(right[j]);
    lr(j) = ev(right[j]);
  }
  CVec coef;
  if (!right.empty()) coef = (Vr.transpose() * Vr).partialPivLu().solve(Vr.transpose() * f0);

  const size_t nt = cfg.times.size();
  std::vector<CVec> residue(nt, CVec::Zero(n));
  std::vector<double> scale(nt);
  const double f0n = f0.norm();
  for (size_t q = 0; q < nt; ++q) {
    const double t = cfg.times[q];
    if (!right.empty()) residue[q] = Vr * (lr.array() * t).exp().matrix().cwiseProduct(coef);
    scale[q] = std::max(residue[q].norm(), std::exp(-(res.sigma + res.distance) * t) * f0n);
  }

  // Truncation from the tail of R^{k+1} f - lambda^{-(k+1)} (f + (k+1) B f / lambda),
  // which decays like |tau|^{-(k+3)}; both subtracted terms integrate to zero on the line.
  Eigen::JacobiSVD<CMat> svd(B);
  const double bn = svd.singularValues()(0);
  const double ck = 0.5 * (k + 1) * (k + 2);
  auto tail = [&](double T, double t) {
    const double amp = std::pow(1.0 - std::min(0.5, bn / T), -(k + 3));
    return factorial(k) / std::pow(t, k) / pi * std::exp(-res.sigma * t) * ck * bn * bn * f0n * amp *
           std::pow(T, -(k + 2)) / (k + 2);
  };
  double T = cfg.n_trunc;
  if (T <= 0.0) {
    T = 2.0 * bn + 1.0;
    for (size_t q = 0; q < nt; ++q) {
      const double t = cfg.times[q];
      while (tail(T, t) > cfg.tail_tol * scale[q]) T *= 1.1;
    }
  }
  const double t_max = *std::max_element(cfg.times.begin(), cfg.times.end());
  double h = cfg.quad_step;
  // Aliasing error ~ M exp(-distance (2 pi / h - t)); M grows with the
  // non-normality of B, hence the generous exponent.
  if (h <= 0.0) h = 2.0 * pi / (t_max + std::log(1e24) / res.distance);
  res.n_trunc = T;
  res.quad_step = h;

  Eigen::ComplexSchur<CMat> schur(B);
  const CMat& Ts = schur.matrixT();
  const CMat& U = schur.matrixU();
  const CVec ft = U.adjoint() * f0;
  const CVec Bft = Ts * ft;
  const long J = static_cast<long>(std::ceil(T / h));
  res.n_nodes = static_cast<int>(2 * J + 1);
  std::vector<CVec> acc(nt, CVec::Zero(n));
  CVec x(n);
  CMat M(n, n);
  for (long j = -J; j <= J; ++j) {
    const cplx lam(-res.sigma, h * static_cast<double>(j));
    M = -Ts;
    M.diagonal().array() += lam;
    x = ft;
    for (int m = 0; m <= k; ++m) M.triangularView<Eigen::Upper>().solveInPlace(x);
    const cplx li = 1.0 / lam;
    const cplx lk = std::pow(li, k + 1);
    x -= lk * (ft + (static_cast<double>(k + 1) * li) * Bft);
    for (size_t q = 0; q < nt; ++q) acc[q] += (h * std::exp(lam * cfg.times[q])) * x;
  }
  for (size_t q = 0; q < nt; ++q) {
    const double t = cfg.times[q];
    const CVec line = (factorial(k) / std::pow(t, k) / (2.0 * pi)) * (U * acc[q]);
    res.line_norm.push_back(line.norm());
    res.f.push_back(line + residue[q]);
    res.tail_estimate.push_back(tail(T, t));
  }
  return res;
}

DecayFit mode_decay_fit(const DispersionContext& ctx, double r, const CVec& f0, const std::vector<double>& times) {
  if (times.size() < 3) throw ConfigError("mode_decay_fit: need at least three times");
  const FourierModeOperator mode = build_mode_operator(ctx, r);
  std::vector<double> t, y;
  for (double tt : times) {
    const double nrm = propagate_expm(mode, f0, tt).norm();
    if (nrm <= 0.0) continue;
    t.push_back(tt);
    y.push_back(std::log(nrm));
  }
  DecayFit out;
  const LineFit lf = fit_line(t, y);
  out.rate = lf.slope;
  out.r2 = lf.r2;
  const double tmin = *std::min_element(times.begin(), times.end());
  const double tmax = *std::max_element(times.begin(), times.end());
  if (tmin <= 0.0 || tmax < 100.0 * tmin) out.warnings.push_back("time window spans less than two decades");
  if (lf.r2 < 0.98) out.warnings.push_back("trajectory is not single-exponential on the window (R^2 < 0.98)");
  return out;
}

double WholeSpaceProblem::alpha() const {
  if (profile == Profile::gaussian) return 0.0;
  return std::min(d_x * (1.0 - 1.0 / p), 0.5 * d_x - 0.05);
}

double WholeSpaceProblem::g_hat(double y) const {
  const double base = std::pow(2.0 * pi * width * width, 0.5 * d_x) * std::exp(-2.0 * pi * pi * width * width * y * y);
  const double a = alpha();
  return a == 0.0 ? base : base * std::pow(y, -a);
}

double WholeSpaceProblem::g_l2_squared() const { return std::pow(pi * width * width, 0.5 * d_x); }

double WholeSpaceProblem::g_lp_squared() const {
  return std::pow(2.0 * pi * width * width / p, static_cast<double>(d_x) / p);
}

RadialRule radial_rule(const WholeSpaceProblem& prob) {
  if (prob.d_x < 1) throw ConfigError("whole space: d_x must be positive");
  if (!(prob.p >= 1.0 && prob.p <= 2.0)) throw ConfigError("whole space: p must lie in [1, 2]");
  if (!(prob.width > 0.0)) throw ConfigError("whole space: width must be positive");
  double ymax = prob.y_max;
  if (ymax <= 0.0) ymax = std::sqrt(std::log(1e16) / (4.0 * pi * pi * prob.width * prob.width));
  double edge = prob.profile == Profile::gaussian ? prob.y_min : prob.y_min * 1e-6;
  std::vector<double> edges{0.0};
  while (edge < ymax) {
    edges.push_back(edge);
    edge *= 2.0;
  }
  edges.push_back(ymax);
  const double area = sphere_area(prob.d_x);
  std::vector<double> y, w;
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    const Rule1D g = gauss_legendre(prob.n_per_panel, edges[i], edges[i + 1]);
    for (int q = 0; q < g.size(); ++q) {
      y.push_back(g.x[q]);
      w.push_back(g.w[q] * area * std::pow(g.x[q], prob.d_x - 1));
    }
  }
  RadialRule rr;
  rr.y = Eigen::Map<Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
  rr.w = Eigen::Map<Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
  return rr;
}

namespace {

// ||e^{tB} h||^2 and ||R_a e^{tB} h||^2 for all times at one mode.
void mode_norms(const CMat& B, const CVec& h, const CMat& Ra, const std::vector<double>& times, Vec& plain,
                Vec& weighted) {
  const size_t nt = times.size();
  plain.resize(nt);
  weighted.resize(nt);
  Eigen::ComplexEigenSolver<CMat> es(B);
  const CMat& V = es.eigenvectors();
  const bool use_eig = es.info() == Eigen::Success && eigenvector_condition(V) < 1e8;
  CVec c;
  if (use_eig) c = V.partialPivLu().solve(h);
  for (size_t q = 0; q < nt; ++q) {
    CVec f;
    if (times[q] == 0.0) f = h;
    else if (use_eig) f = V * (es.eigenvalues().array() * times[q]).exp().matrix().cwiseProduct(c);
    else f = (times[q] * B).exp() * h;
    plain(q) = f.squaredNorm();
    weighted(q) = (Ra * f).squaredNorm();
  }
}

}  // namespace

Trajectory solve_linear_whole_space(const WholeSpaceProblem& prob, const DispersionContext& ctx,
                                    const std::vector<double>& times) {
  if (prob.h.size() != ctx.V1.rows()) throw ConfigError("whole space: h has the wrong size");
  if (prob.d_x != ctx.op.basis.dim_v) throw ConfigError("whole space: d_x must equal the velocity dimension");
  const RadialRule rr = radial_rule(prob);
  Trajectory traj;
  traj.t = times;
  traj.n_nodes = static_cast<int>(rr.y.size());
  const size_t nt = times.size();
  Vec l2 = Vec::Zero(nt), wt = Vec::Zero(nt);
  const CVec h = prob.h.cast<cplx>();
  const CMat Ra = ctx.R_a.cast<cplx>();
  double plan = 0.0;
  for (Eigen::Index i = 0; i < rr.y.size(); ++i) {
    const double y = rr.y(i);
    const double g = prob.g_hat(y);
    const double wy = rr.w(i) * std::pow(1.0 + y * y, prob.m) * g * g;
    plan += rr.w(i) * g * g;
    Vec a, b;
    mode_norms(build_mode_operator(ctx, y).B_hat, h, Ra, times, a, b);
    l2 += wy * a;
    wt += wy * b;
  }
  traj.norm_l2hm.assign(l2.data(), l2.data() + nt);
  traj.norm_weighted_hm.assign(wt.data(), wt.data() + nt);
  if (prob.profile == Profile::gaussian) traj.plancherel_defect = std::abs(plan / prob.g_l2_squared() - 1.0);
  // Tail beyond y_max, bounded with the contraction ||e^{tB} h|| <= ||h||.
  const double ymax = rr.y(rr.y.size() - 1) + 1e-12;
  const Rule1D g = gauss_legendre(16, ymax, ymax + 5.0 / (pi * prob.width));
  double tail = 0.0;
  for (int q = 0; q < g.size(); ++q) {
    const double gh = prob.g_hat(g.x[q]);
    tail += g.w[q] * sphere_area(prob.d_x) * std::pow(g.x[q], prob.d_x - 1) * std::pow(1.0 + g.x[q] * g.x[q], prob.m) *
            gh * gh;
  }
  traj.tail_estimate = tail * prob.h.squaredNorm();
  return traj;
}

double predicted_exponent(int d, double p) { return -0.5 * d * (2.0 / p - 1.0); }

PowerFit decay_exponent_fit(const Trajectory& traj, double p, double t_lo, double t_hi) {
  if (!(p >= 1.0 && p <= 2.0)) throw ConfigError("decay_exponent_fit: p must lie in [1, 2]");
  std::vector<double> x, y;
  for (size_t i = 0; i < traj.t.size(); ++i)
    if (traj.t[i] >= t_lo && traj.t[i] <= t_hi && traj.norm_l2hm[i] > 0.0) {
      x.push_back(std::log1p(traj.t[i]));
      y.push_back(std::log(traj.norm_l2hm[i]));
    }
  if (x.size() < 6) throw ConfigError("decay_exponent_fit: fewer than six samples in the window");
  PowerFit out;
  const LineFit lf = fit_line(x, y);
  out.exponent = lf.slope;
  out.r2 = lf.r2;
  const size_t q = std::max<size_t>(3, x.size() / 4);
  out.slope_head = fit_line({x.begin(), x.begin() + q}, {y.begin(), y.begin() + q}).slope;
  out.slope_tail = fit_line({x.end() - q, x.end()}, {y.end() - q, y.end()}).slope;
  const double spread = std::abs(out.slope_head - out.slope_tail) /
                        std::max({std::abs(out.slope_head), std::abs(out.slope_tail), 0.05});
  if (lf.r2 < 0.995) out.warnings.push_back("poor power-law fit (R^2 < 0.995)");
  if (spread > 0.25) out.warnings.push_back("local log-log slope drifts across the window; decay is not a power law");
  out.flagged = !out.warnings.empty();
  return out;
}

RegularizingReport regularizing_check(const WholeSpaceProblem& prob, const DispersionContext& ctx,
                                      const GapScanReport& gap, const std::vector<double>& times, int k) {
  if (k < 2) throw ConfigError("regularizing_check: k must be at least 2");
  if (prob.profile != Profile::gaussian) throw ConfigError("regularizing_check: needs the Gaussian profile");
  for (double t : times)
    if (!(t > 0.0)) throw ConfigError("regularizing_check: times must be positive");
  RegularizingReport rep;
  rep.sigma_bar = std::min(gap.sigma0, gap.sigma1);
  const Trajectory traj = solve_linear_whole_space(prob, ctx, times);
  // ||f||^2_{H(a^{-1/2}) H^m_x} and ||(a^{-1/2})^w f||^2_{L^2_v(L^p_x)} for f = g h.
  const RadialRule rr = radial_rule(prob);
  double ghm = 0.0;
  for (Eigen::Index i = 0; i < rr.y.size(); ++i) {
    const double g = prob.g_hat(rr.y(i));
    ghm += rr.w(i) * std::pow(1.0 + rr.y(i) * rr.y(i), prob.m) * g * g;
  }
  const double hdual = prob.h.dot(ctx.M_a_inv * prob.h);
  const double first = ghm * hdual;
  const double second = prob.g_lp_squared() * hdual;
  const double expo = predicted_exponent(prob.d_x, prob.p);
  for (size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const double rhs = std::exp(-2.0 * rep.sigma_bar * t) / std::pow(t, 2 * k) * first + std::pow(1.0 + t, expo) * second;
    rep.t.push_back(t);
    rep.lhs.push_back(traj.norm_weighted_hm[i]);
    rep.rhs.push_back(rhs);
    rep.ratio.push_back(traj.norm_weighted_hm[i] / rhs);
    rep.sup_ratio = std::max(rep.sup_ratio, rep.ratio.back());
  }
  return rep;
}

}  // namespace kspec
