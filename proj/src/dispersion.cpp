// SPDX-License-Identifier: Apache-2.0
#include "kspec/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "kspec/linalg.hpp"

namespace kspec {

namespace {
const cplx I1(0.0, 1.0);
}

DispersionContext make_dispersion_context(const LinearizedOperator& op, const Mat* M_a) {
  DispersionContext ctx;
  ctx.op = op;
  const int nb = op.basis.size();
  if (op.A.rows() != nb) throw ConfigError("dispersion: operator has not been split into A and K");
  ctx.V1 = multiply_by_v1(op.basis);
  ctx.Psi = kernel_vectors(op.basis).columns;
  const Projectors pr = projection_P0(op.basis);
  ctx.P0 = pr.P0;
  ctx.P1 = pr.P1;
  ctx.U1 = projector_range(ctx.P1);
  ctx.M_a = M_a ? *M_a : Mat::Identity(nb, nb);
  Eigen::LLT<Mat> llt(ctx.M_a);
  if (llt.info() != Eigen::Success) throw NumericalError("dispersion: weighted Gram is not positive definite");
  ctx.R_a = llt.matrixU();
  ctx.M_a_inv = llt.solve(Mat::Identity(nb, nb));
  return ctx;
}

FourierModeOperator build_mode_operator(const DispersionContext& ctx, double r) {
  if (r < 0.0) throw ConfigError("build_mode_operator: r must be nonnegative");
  FourierModeOperator m;
  m.r = r;
  const CMat stream = (-2.0 * pi * r * I1) * ctx.V1.cast<cplx>();
  m.B_hat = stream + ctx.op.L.cast<cplx>();
  m.A_hat = stream - ctx.op.A.cast<cplx>();
  return m;
}

Spectrum spectrum(const FourierModeOperator& mode) {
  Eigen::ComplexEigenSolver<CMat> es(mode.B_hat);
  if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigen-solver failed");
  const Eigen::Index n = mode.B_hat.rows();
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const CVec& ev = es.eigenvalues();
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    return ev(a).imag() < ev(b).imag();
  });
  Spectrum s;
  s.values.resize(n);
  s.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    s.values(k) = ev(idx[k]);
    s.vectors.col(k) = es.eigenvectors().col(idx[k]).normalized();
  }
  s.condition = eigenvector_condition(s.vectors);
  s.defective = s.condition > 1e8;
  return s;
}

StreamEigen stream_eigen(const DispersionContext& ctx) {
  const int d = ctx.op.basis.dim_v;
  const int nk = d + 2;
  const Mat A0 = ctx.Psi.transpose() * ctx.V1 * ctx.Psi;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A0 + A0.transpose()));
  StreamEigen out;
  out.eta0.resize(nk);
  out.E.resize(nk, nk);
  // Zero eigenspace: shear directions plus the heat mode orthogonal to them.
  Mat zero(nk, 0);
  std::vector<int> neg, pos;
  for (int k = 0; k < nk; ++k) {
    const double e = es.eigenvalues()(k);
    if (std::abs(e) < 1e-8) {
      zero.conservativeResize(Eigen::NoChange, zero.cols() + 1);
      zero.col(zero.cols() - 1) = es.eigenvectors().col(k);
    } else if (e < 0) {
      neg.push_back(k);
    } else {
      pos.push_back(k);
    }
  }
  auto fix_sign = [](Vec v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (std::abs(v(i)) > 1e-12) return v(i) < 0 ? Vec(-v) : v;
    return v;
  };
  int col = 0;
  for (int k : neg) {
    out.eta0(col) = es.eigenvalues()(k);
    out.E.col(col) = fix_sign(es.eigenvectors().col(k));
    out.labels.push_back("acoustic-");
    ++col;
  }
  Mat shear = Mat::Zero(nk, d - 1);
  for (int i = 0; i < d - 1; ++i) shear(2 + i, i) = 1.0;
  for (int i = 0; i < d - 1; ++i) {
    out.eta0(col) = 0.0;
    out.E.col(col) = shear.col(i);
    out.labels.push_back("shear");
    ++col;
  }
  for (Eigen::Index z = 0; z < zero.cols(); ++z) {
    Vec h = zero.col(z) - shear * (shear.transpose() * zero.col(z));
    for (int c = d - 1 + static_cast<int>(neg.size()); c < col; ++c) h -= out.E.col(c) * out.E.col(c).dot(h);
    if (h.norm() < 1e-6) continue;
    out.eta0(col) = 0.0;
    out.E.col(col) = fix_sign(h.normalized());
    out.labels.push_back("heat");
    ++col;
  }
  for (int k : pos) {
    out.eta0(col) = es.eigenvalues()(k);
    out.E.col(col) = fix_sign(es.eigenvectors().col(k));
    out.labels.push_back("acoustic+");
    ++col;
  }
  if (col != nk) throw NumericalError("stream_eigen: unexpected zero-eigenspace dimension");
  return out;
}

namespace {

struct TrackResult {
  BranchSet set;
  std::vector<Spectrum> spectra;
  std::vector<std::vector<int>> owned;  // eigenvalue indices attributed to branches
};

TrackResult track_impl(const DispersionContext& ctx, const Vec& r_grid, double min_overlap, bool allow_loss) {
  if (r_grid.size() < 2 || r_grid(0) != 0.0) throw ConfigError("track_branches: r_grid must start at 0");
  for (Eigen::Index k = 1; k < r_grid.size(); ++k)
    if (!(r_grid(k) > r_grid(k - 1))) throw ConfigError("track_branches: r_grid must be increasing");
  const StreamEigen se = stream_eigen(ctx);
  const int nk = static_cast<int>(se.eta0.size());
  const Eigen::Index nr = r_grid.size();

  TrackResult res;
  BranchSet& bs = res.set;
  bs.r_grid = r_grid;
  bs.labels = se.labels;
  bs.lambda = CMat::Constant(nr, nk, cplx(std::numeric_limits<double>::quiet_NaN(), 0.0));
  bs.overlap = Mat::Zero(nr, nk);
  res.spectra.reserve(nr);
  res.owned.assign(nr, {});

  CMat prev = (ctx.Psi * se.E).cast<cplx>();
  {
    const FourierModeOperator m0 = build_mode_operator(ctx, 0.0);
    Spectrum sp = spectrum(m0);
    for (int j = 0; j < nk; ++j) {
      bs.lambda(0, j) = prev.col(j).dot(m0.B_hat * prev.col(j));
      bs.overlap(0, j) = 1.0;
    }
    // At r = 0 the branches own the d+2 eigenvalues closest to zero.
    std::vector<int> idx(sp.values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + nk, idx.end(),
                      [&](int a, int b) { return std::abs(sp.values(a)) < std::abs(sp.values(b)); });
    res.owned[0].assign(idx.begin(), idx.begin() + nk);
    res.spectra.push_back(std::move(sp));
  }

  bool lost = false;
  for (Eigen::Index k = 1; k < nr; ++k) {
    const FourierModeOperator m = build_mode_operator(ctx, r_grid(k));
    Spectrum sp = spectrum(m);
    if (lost) {
      res.spectra.push_back(std::move(sp));
      continue;
    }
    const Eigen::Index n = sp.values.size();
    // Clusters of numerically coincident eigenvalues.
    const double ctol = 1e-9 * (1.0 + sp.values.cwiseAbs().maxCoeff());
    std::vector<std::vector<int>> clusters;
    std::vector<bool> used(n, false);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[i]) continue;
      std::vector<int> c{static_cast<int>(i)};
      used[i] = true;
      for (Eigen::Index q = i + 1; q < n; ++q)
        if (!used[q] && std::abs(sp.values(q) - sp.values(i)) <= ctol) {
          c.push_back(static_cast<int>(q));
          used[q] = true;
        }
      clusters.push_back(c);
    }
    std::vector<CMat> Q(clusters.size());
    for (size_t c = 0; c < clusters.size(); ++c) {
      CMat V(sp.vectors.rows(), clusters[c].size());
      for (size_t q = 0; q < clusters[c].size(); ++q) V.col(q) = sp.vectors.col(clusters[c][q]);
      Eigen::HouseholderQR<CMat> qr(V);
      Q[c] = qr.householderQ() * CMat::Identity(V.rows(), V.cols());
    }
    Mat ov(nk, clusters.size());
    for (int j = 0; j < nk; ++j)
      for (size_t c = 0; c < clusters.size(); ++c) ov(j, c) = (Q[c].adjoint() * prev.col(j)).norm();

    std::vector<int> capacity(clusters.size());
    for (size_t c = 0; c < clusters.size(); ++c) capacity[c] = static_cast<int>(clusters[c].size());
    std::vector<int> assign(nk, -1);
    for (int it = 0; it < nk; ++it) {
      double best = -1.0;
      int bj = -1, bc = -1;
      for (int j = 0; j < nk; ++j) {
        if (assign[j] >= 0) continue;
        for (size_t c = 0; c < clusters.size(); ++c)
          if (capacity[c] > 0 && ov(j, c) > best) {
            best = ov(j, c);
            bj = j;
            bc = static_cast<int>(c);
          }
      }
      assign[bj] = bc;
      --capacity[bc];
    }
    double worst = 1.0;
    for (int j = 0; j < nk; ++j) worst = std::min(worst, ov(j, assign[j]));
    if (worst < min_overlap) {
      if (!allow_loss)
        throw NumericalError("track_branches: eigenvector overlap " + std::to_string(worst) + " below " +
                             std::to_string(min_overlap) + " at r = " + std::to_string(r_grid(k)) +
                             "; refine the r grid");
      lost = true;
      bs.complete = false;
      res.spectra.push_back(std::move(sp));
      continue;
    }
    std::vector<bool> owned(n, false);
    for (int j = 0; j < nk; ++j) {
      const int c = assign[j];
      cplx mean = 0.0;
      for (int q : clusters[c]) mean += sp.values(q);
      mean /= static_cast<double>(clusters[c].size());
      bs.lambda(k, j) = mean;
      bs.overlap(k, j) = ov(j, c);
      CVec v = Q[c] * (Q[c].adjoint() * prev.col(j));
      prev.col(j) = v / v.norm();
      for (int q : clusters[c]) owned[q] = true;
    }
    for (Eigen::Index q = 0; q < n; ++q)
      if (owned[q]) res.owned[k].push_back(static_cast<int>(q));
    const double dr = r_grid(k) - r_grid(k - 1);
    for (int j = 0; j < nk; ++j)
      bs.continuity_C = std::max(bs.continuity_C, std::abs(bs.lambda(k, j) - bs.lambda(k - 1, j)) / dr);
    res.spectra.push_back(std::move(sp));
  }
  return res;
}

}  // namespace

BranchSet track_branches(const DispersionContext& ctx, const Vec& r_grid, double min_overlap, bool allow_loss) {
  return track_impl(ctx, r_grid, min_overlap, allow_loss).set;
}

Vec fit_grid(double r_max, int n) {
  Vec r(n + 1);
  for (int k = 0; k <= n; ++k) r(k) = r_max * k / n;
  return r;
}

BranchFit fit_asymptotics(const BranchSet& bs, double r_max) {
  BranchFit fit;
  fit.r_max = r_max;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index k = 0; k < bs.r_grid.size(); ++k)
    if (bs.r_grid(k) > 0.0 && bs.r_grid(k) <= r_max * (1.0 + 1e-12) && !std::isnan(bs.lambda(k, 0).real()))
      rows.push_back(k);
  if (rows.size() < 3) throw ConfigError("fit_asymptotics: fewer than three points in the fit window");
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index nk = bs.lambda.cols();
  // Odd powers for Im, even powers for Re (lambda(-r) = conj lambda(r)); columns
  // in x = r / r_max for conditioning.
  Mat Xo(m, 3), Xe(m, 3);
  Vec r3(m), rr(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double r = bs.r_grid(rows[i]);
    const double x = r / r_max;
    rr(i) = r;
    Xo(i, 0) = x;
    Xo(i, 1) = x * x * x;
    Xo(i, 2) = x * x * x * x * x;
    Xe(i, 0) = x * x;
    Xe(i, 1) = x * x * x * x;
    Xe(i, 2) = x * x * x * x * x * x;
    r3(i) = r * r * r;
  }
  fit.eta0.resize(nk);
  fit.eta1.resize(nk);
  fit.residual_im.resize(nk);
  fit.residual_re.resize(nk);
  for (Eigen::Index j = 0; j < nk; ++j) {
    Vec im(m), re(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      im(i) = bs.lambda(rows[i], j).imag();
      re(i) = bs.lambda(rows[i], j).real();
    }
    const LeastSquares fo = least_squares(Xo, im);
    const LeastSquares fe = least_squares(Xe, re);
    fit.eta0(j) = -fo.coef(0) / (2.0 * pi * r_max);
    fit.eta1(j) = fe.coef(0) / (r_max * r_max);
    // Remainder of the two-term expansion; it should scale like r^3.
    Vec rem_im(m), rem_re(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double r = rr(i);
      rem_im(i) = std::abs(im(i) + 2.0 * pi * fit.eta0(j) * r) / r3(i);
      rem_re(i) = std::abs(re(i) - fit.eta1(j) * r * r) / r3(i);
    }
    fit.residual_im(j) = rem_im.maxCoeff();
    fit.residual_re(j) = rem_re.maxCoeff();
    const Eigen::Index q = std::max<Eigen::Index>(1, m / 3);
    const double head = std::max(rem_im.head(q).maxCoeff(), rem_re.head(q).maxCoeff());
    const double tail = std::max(rem_im.tail(q).maxCoeff(), rem_re.tail(q).maxCoeff());
    if (head > 10.0 * tail + 1e-3)
      fit.warnings.push_back("branch " + std::to_string(j) + ": remainder / r^3 grows toward r = 0 (" +
                             std::to_string(head) + " vs " + std::to_string(tail) + ")");
  }
  return fit;
}

ReducedT reduced_T_matrix(const DispersionContext& ctx, double r, cplx lambda) {
  ReducedT out;
  out.stream = stream_eigen(ctx);
  const Eigen::Index nb = ctx.V1.rows();
  const CMat U1 = ctx.U1.cast<cplx>();
  const CMat S_full = -lambda * CMat::Identity(nb, nb) - (2.0 * pi * r * I1) * ctx.V1.cast<cplx>() +
                      ctx.op.L.cast<cplx>();
  const CMat S = U1.adjoint() * S_full * U1;
  Eigen::PartialPivLU<CMat> lu(S);
  if (!(lu.rcond() > 1e-10)) throw NumericalError("reduced_T_matrix: S restricted to range(P1) is singular");
  const Mat modes = ctx.Psi * out.stream.E;
  const CMat rhs = U1.adjoint() * ((2.0 * pi * I1) * (ctx.V1 * modes).cast<cplx>());
  const CMat x = lu.solve(rhs);
  out.T = modes.transpose().cast<cplx>() * ((-2.0 * pi * I1) * (ctx.V1.cast<cplx>() * (U1 * x)));
  return out;
}

cplx dispersion_determinant(const DispersionContext& ctx, double r, cplx lambda, double* scale) {
  const ReducedT rt = reduced_T_matrix(ctx, r, lambda);
  const Eigen::Index nk = rt.T.rows();
  CMat M = -r * r * rt.T;
  for (Eigen::Index j = 0; j < nk; ++j) M(j, j) += lambda + 2.0 * pi * I1 * r * rt.stream.eta0(j);
  if (scale) {
    // Sum of the magnitudes of the three terms per row, so cancellation at a root shows.
    double s = 1.0;
    for (Eigen::Index j = 0; j < nk; ++j)
      s *= std::abs(lambda) + 2.0 * pi * r * std::abs(rt.stream.eta0(j)) + r * r * rt.T.row(j).norm();
    *scale = s;
  }
  return M.determinant();
}

Vec default_gap_grid(double r_max) {
  std::vector<double> r;
  for (int k = 0; k <= 100; ++k) r.push_back(0.01 * k);
  double x = 1.0;
  while (x < r_max) {
    x = std::min(r_max, x * 1.05);
    r.push_back(x);
  }
  return Eigen::Map<Vec>(r.data(), static_cast<Eigen::Index>(r.size()));
}

GapScanReport spectral_gap_scan(const DispersionContext& ctx, const Vec& r_grid) {
  const TrackResult tr = track_impl(ctx, r_grid, 0.7, true);
  const int nk = ctx.op.basis.dim_v + 2;
  const double nu1 = ctx.op.nu1_disc;
  GapScanReport rep;
  rep.r_grid = r_grid;
  rep.nu1 = nu1;
  const Eigen::Index nr = r_grid.size();
  rep.max_re.resize(nr);
  rep.max_re_nonbranch.resize(nr);
  rep.min_re_branch.resize(nr);
  rep.branch_overlap.resize(nr);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  bool intact = true;
  rep.y0 = 0.0;
  for (Eigen::Index k = 0; k < nr; ++k) {
    const Spectrum& sp = tr.spectra[k];
    rep.cloud.push_back(sp.values);
    std::vector<bool> owned(sp.values.size(), false);
    for (int q : tr.owned[k]) owned[q] = true;
    int above = 0;
    double mx = -1e300, mxn = -1e300, mnb = 1e300;
    for (Eigen::Index q = 0; q < sp.values.size(); ++q) {
      const double re = sp.values(q).real();
      if (re > -nu1) {
        ++above;
        rep.tau1 = std::max(rep.tau1, std::abs(sp.values(q).imag()));
      }
      mx = std::max(mx, re);
      if (owned[q]) mnb = std::min(mnb, re);
      else mxn = std::max(mxn, re);
    }
    rep.n_above.push_back(above);
    rep.max_re(k) = mx;
    rep.max_re_nonbranch(k) = mxn;
    const bool tracked = !tr.owned[k].empty();
    rep.min_re_branch(k) = tracked ? mnb : nan;
    rep.branch_overlap(k) = tracked ? tr.set.overlap.row(k).minCoeff() : 0.0;
    rep.max_abscissa = std::max(rep.max_abscissa, mx);
    if (intact && above == nk && tracked && rep.branch_overlap(k) >= 0.9 && mnb > -nu1) rep.y0 = r_grid(k);
    else intact = false;
  }
  // y1: smallest grid point after which nothing lies above -nu1.
  rep.y1_found = rep.n_above.back() == 0;
  if (rep.y1_found) {
    Eigen::Index k = nr - 1;
    while (k > 0 && rep.n_above[k - 1] == 0) --k;
    rep.y1 = r_grid(k);
  }
  double a = 1e300, b = -1e300, c = 1e300;
  for (Eigen::Index k = 0; k < nr; ++k) {
    if (r_grid(k) <= rep.y0) {
      a = std::min(a, -rep.max_re_nonbranch(k));
      b = std::max(b, -rep.min_re_branch(k));
    }
    if (r_grid(k) >= rep.y0 && r_grid(k) > 0.0) c = std::min(c, -rep.max_re(k));
  }
  rep.sigma0 = 0.5 * (a + std::max(b, 0.0));
  rep.sigma1 = 0.5 * c;
  return rep;
}

double sigma_rule(const GapScanReport& rep, double r) { return r <= rep.y0 ? rep.sigma0 : rep.sigma1; }

CVec resolvent_A(const FourierModeOperator& mode, cplx lambda, const CVec& f) {
  const Eigen::Index n = mode.A_hat.rows();
  const CMat M = lambda * CMat::Identity(n, n) - mode.A_hat;
  Eigen::PartialPivLU<CMat> lu(M);
  if (!(lu.rcond() > 1e-14)) throw NumericalError("resolvent_A: lambda - A_hat is singular");
  return lu.solve(f);
}

ResolventBoundReport resolvent_bound_check(const DispersionContext& ctx, int n, unsigned long long seed, double r_max,
                                           double tau_max) {
  ResolventBoundReport rep;
  const double nu0 = ctx.op.nu0_disc, nu1 = ctx.op.nu1_disc;
  rep.bound_weighted = 2.0 / nu0;
  rep.bound_plain = 2.0 / nu1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(0.0, r_max), ut(-tau_max, tau_max);
  std::normal_distribution<double> nd;
  const Eigen::Index nb = ctx.V1.rows();
  const CMat Minv = ctx.M_a_inv.cast<cplx>();
  const CMat Ra = ctx.R_a.cast<cplx>();
  for (int i = 0; i < n; ++i) {
    ResolventSample s;
    s.r = ur(rng);
    s.tau = ut(rng);
    CVec f(nb);
    for (Eigen::Index k = 0; k < nb; ++k) {
      const double re = nd(rng);
      f(k) = cplx(re, nd(rng));
    }
    const FourierModeOperator m = build_mode_operator(ctx, s.r);
    const CVec g = resolvent_A(m, cplx(-0.5 * nu1, s.tau), f);
    const double fdual = std::sqrt(std::abs(f.dot(Minv * f)));
    s.weighted_ratio = (Ra * g).norm() / fdual;
    s.plain_ratio = g.norm() / f.norm();
    rep.max_weighted = std::max(rep.max_weighted, s.weighted_ratio);
    rep.max_plain = std::max(rep.max_plain, s.plain_ratio);
    rep.samples.push_back(s);
  }
  const double slack = 1.0 + 1e-8;
  rep.holds = rep.max_weighted <= rep.bound_weighted * slack && rep.max_plain <= rep.bound_plain * slack;
  return rep;
}

ResolventKReport resolvent_K_decay(const DispersionContext& ctx, const std::vector<double>& r_list,
                                   const std::vector<double>& tau_list) {
  ResolventKReport rep;
  const double nu1 = ctx.op.nu1_disc;
  // K = Psi C Psi^T, so ||R K|| = ||R Psi C||.
  const Mat C = ctx.Psi.transpose() * ctx.op.K * ctx.Psi;
  const CMat PsiC = (ctx.Psi * C).cast<cplx>();
  const Eigen::Index nb = ctx.V1.rows();
  std::vector<double> x, y;
  for (double r : r_list) {
    const FourierModeOperator m = build_mode_operator(ctx, r);
    for (double tau : tau_list) {
      const CMat M = cplx(-nu1, tau) * CMat::Identity(nb, nb) - m.A_hat;
      Eigen::PartialPivLU<CMat> lu(M);
      const CMat X = lu.solve(PsiC);
      Eigen::JacobiSVD<CMat> svd(X);
      const double nrm = svd.singularValues()(0);
      if (!std::isfinite(nrm)) throw NumericalError("resolvent_K_decay: non-finite resolvent norm");
      rep.table.push_back({r, tau, nrm});
      x.push_back(r + std::abs(tau));
      y.push_back(nrm);
    }
  }
  if (x.size() >= 2) rep.spearman = spearman(x, y);
  std::vector<size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] > x[b]; });
  for (size_t i : idx) {
    if (y[i] >= 0.5) break;
    rep.threshold = x[i];
    rep.threshold_found = true;
  }
  return rep;
}

namespace {

struct ResolventNorms {
  double plain = 0, weighted = 0;
};

ResolventNorms resolvent_norms(const DispersionContext& ctx, const CMat& B, cplx lambda) {
  const Eigen::Index n = B.rows();
  const CMat M = lambda * CMat::Identity(n, n) - B;
  Eigen::PartialPivLU<CMat> lu(M);
  if (!(lu.rcond() > 1e-14)) throw NumericalError("uniform_resolvent_scan: singular resolvent on the contour");
  const CMat Rinv = lu.inverse();
  const CMat Ra = ctx.R_a.cast<cplx>();
  Eigen::BDCSVD<CMat> s1(Rinv), s2(Ra * Rinv * Ra.transpose());
  return {s1.singularValues()(0), s2.singularValues()(0)};
}

struct LatticeSup {
  double plain = 0, weighted = 0;
};

double peak_in_tau(const DispersionContext& ctx, const CMat& B, double sigma, double tau_max, int n_tau,
                   LatticeSup& sup) {
  auto eval = [&](double t) {
    const ResolventNorms rn = resolvent_norms(ctx, B, cplx(-sigma, t));
    sup.plain = std::max(sup.plain, rn.plain);
    sup.weighted = std::max(sup.weighted, rn.weighted);
    return std::max(rn.plain, rn.weighted);
  };
  const double h = 2.0 * tau_max / (n_tau - 1);
  // Lattice points plus the imaginary parts of eigenvalues near the line.
  std::vector<double> cand;
  for (int j = 0; j < n_tau; ++j) cand.push_back(-tau_max + h * j);
  const CVec ev = B.eigenvalues();
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (std::abs(ev(k).real() + sigma) < 1.0 && std::abs(ev(k).imag()) <= tau_max) cand.push_back(ev(k).imag());
  double best_t = cand[0], best = -1.0;
  for (double t : cand) {
    const double v = eval(t);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  // Golden-section refinement around the best candidate.
  double lo = std::max(-tau_max, best_t - 0.5 * h), hi = std::min(tau_max, best_t + 0.5 * h);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = eval(a), fb = eval(b);
  for (int it = 0; it < 40 && hi - lo > 1e-7 * (1.0 + tau_max); ++it) {
    if (fa > fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = eval(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = eval(b);
    }
  }
  return std::max({best, fa, fb});
}

LatticeSup lattice_sup(const DispersionContext& ctx, const GapScanReport& gap, double r_max, double tau_max, int n_r,
                       int n_tau) {
  LatticeSup sup;
  for (int i = 0; i < n_r; ++i) {
    const double r = r_max * i / (n_r - 1);
    peak_in_tau(ctx, build_mode_operator(ctx, r).B_hat, sigma_rule(gap, r), tau_max, n_tau, sup);
  }
  // sigma_r jumps at y0; the sup over r > y0 is approached from the right, so
  // both one-sided limits are evaluated.
  if (gap.y0 > 0.0 && gap.y0 < r_max) {
    const CMat B = build_mode_operator(ctx, gap.y0).B_hat;
    peak_in_tau(ctx, B, gap.sigma0, tau_max, n_tau, sup);
    peak_in_tau(ctx, B, gap.sigma1, tau_max, n_tau, sup);
  }
  return sup;
}

}  // namespace

UniformResolventReport uniform_resolvent_scan(const DispersionContext& ctx, const GapScanReport& gap, double r_max,
                                              double tau_max, int n_r, int n_tau) {
  if (n_r < 2 || n_tau < 3) throw ConfigError("uniform_resolvent_scan: lattice too small");
  UniformResolventReport rep;
  try {
    const LatticeSup a = lattice_sup(ctx, gap, r_max, tau_max, n_r, n_tau);
    const LatticeSup b = lattice_sup(ctx, gap, r_max, tau_max, 2 * n_r - 1, 2 * n_tau - 1);
    rep.sup_plain = a.plain;
    rep.sup_weighted = a.weighted;
    rep.sup_plain_refined = b.plain;
    rep.sup_weighted_refined = b.weighted;
    rep.refinement_change =
        std::max(std::abs(b.plain / a.plain - 1.0), std::abs(b.weighted / a.weighted - 1.0));
  } catch (const NumericalError&) {
    rep.all_resolvable = false;
    throw;
  }
  return rep;
}

double rotation_spot_check(const DispersionContext& ctx, double r, unsigned long long seed) {
  const HermiteBasis& basis = ctx.op.basis;
  const int d = basis.dim_v;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vec w(d);
  for (int i = 0; i < d; ++i) w(i) = nd(rng);
  w.normalize();
  Mat Vw = Mat::Zero(basis.size(), basis.size());
  for (int i = 0; i < d; ++i) Vw += w(i) * multiply_by_v(basis, i);
  const CMat Bw = (-2.0 * pi * r * I1) * Vw.cast<cplx>() + ctx.op.L.cast<cplx>();
  const CVec a = build_mode_operator(ctx, r).B_hat.eigenvalues();
  const CVec b = Bw.eigenvalues();
  std::vector<bool> used(b.size(), false);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double best = 1e300;
    Eigen::Index bi = 0;
    for (Eigen::Index j = 0; j < b.size(); ++j)
      if (!used[j] && std::abs(a(i) - b(j)) < best) {
        best = std::abs(a(i) - b(j));
        bi = j;
      }
    used[bi] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace kspec
