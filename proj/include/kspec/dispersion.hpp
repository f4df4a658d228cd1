// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "kspec/collision.hpp"

namespace kspec {

// Everything the mode operators B(r) = -2 pi i r V1 + L need, computed once.
struct DispersionContext {
  LinearizedOperator op;
  Mat V1;
  Mat Psi;  // kernel vectors, one per column
  Mat P0, P1;
  Mat U1;   // orthonormal basis of range(P1)
  Mat M_a;  // weighted Gram; identity when none is supplied
  Mat M_a_inv;
  Mat R_a;  // upper Cholesky factor, M_a = R_a^T R_a
};
DispersionContext make_dispersion_context(const LinearizedOperator& op, const Mat* M_a = nullptr);

struct FourierModeOperator {
  double r = 0.0;
  CMat B_hat;  // -2 pi i r V1 + L
  CMat A_hat;  // -2 pi i r V1 - A
};
FourierModeOperator build_mode_operator(const DispersionContext& ctx, double r);

struct Spectrum {
  CVec values;   // Re descending, then Im ascending
  CMat vectors;  // unit columns
  double condition = 1.0;
  bool defective = false;  // condition > 1e8
};
Spectrum spectrum(const FourierModeOperator& mode);

// Stream eigenvalues eta0 (ascending) with eigenvectors in kernel coordinates;
// the zero eigenspace is split into the shear directions psi_2..psi_d and the
// remaining heat mode.
struct StreamEigen {
  Vec eta0;
  Mat E;  // (d+2) x (d+2), columns in kernel coordinates
  std::vector<std::string> labels;
};
StreamEigen stream_eigen(const DispersionContext& ctx);

struct BranchFit {
  double r_max = 0.05;
  Vec eta0, eta1;
  Vec residual_im, residual_re;  // max |lambda - two-term expansion| / r^3 on the window
  std::vector<std::string> warnings;
};

struct BranchSet {
  Vec r_grid;
  CMat lambda;   // rows r, columns branches
  Mat overlap;   // matching overlap at each step
  std::vector<std::string> labels;
  double continuity_C = 0.0;  // max |lambda(r_{k+1}) - lambda(r_k)| / dr
  bool complete = true;       // false when tracking stopped below the overlap threshold
  BranchFit fit;
};

// Tracks the d+2 branches bifurcating from the kernel, seeded by the stream
// eigenvectors. Throws NumericalError on an overlap below min_overlap unless
// allow_loss is set, in which case tracking stops there.
BranchSet track_branches(const DispersionContext& ctx, const Vec& r_grid, double min_overlap = 0.7,
                         bool allow_loss = false);

// Uniform grid with n points on (0, r_max] preceded by r = 0.
Vec fit_grid(double r_max = 0.05, int n = 25);

// Im lambda ~ a1 r + a3 r^3 + a5 r^5, Re lambda ~ b2 r^2 + b4 r^4 + b6 r^6;
// eta0 = -a1 / (2 pi), eta1 = b2.
BranchFit fit_asymptotics(const BranchSet& branches, double r_max = 0.05);

// T = P0 (-2 pi i V1) S^{-1} P1 (2 pi i V1) P0 with S = -lambda P1 - 2 pi i r P1 V1 P1 + L
// on range(P1); returned in stream eigen-coordinates (column j = image of the j-th mode).
struct ReducedT {
  CMat T;
  StreamEigen stream;
};
ReducedT reduced_T_matrix(const DispersionContext& ctx, double r, cplx lambda);

// det[lambda I + 2 pi i r diag(eta0) - r^2 T]; scale receives the product over rows of
// |lambda| + 2 pi r |eta0_j| + r^2 |T_j|.
cplx dispersion_determinant(const DispersionContext& ctx, double r, cplx lambda, double* scale = nullptr);

struct GapScanReport {
  Vec r_grid;
  std::vector<CVec> cloud;
  std::vector<int> n_above;          // eigenvalues with Re > -nu1
  Vec max_re;                        // all eigenvalues
  Vec max_re_nonbranch;              // excluding tracked branches
  Vec min_re_branch;                 // tracked branches; NaN once tracking is lost
  Vec branch_overlap;                // smallest branch overlap at each r
  double nu1 = 0.0;
  double y0 = 0.0, y1 = 0.0;
  bool y1_found = false;
  double sigma0 = 0.0, sigma1 = 0.0;
  double tau1 = 0.0;
  double max_abscissa = 0.0;         // largest Re over the scan
};
// 0:0.01:1 followed by a geometric grid to r_max.
Vec default_gap_grid(double r_max = 12.0);
GapScanReport spectral_gap_scan(const DispersionContext& ctx, const Vec& r_grid);
// sigma_r rule of the report: sigma0 for r <= y0, sigma1 beyond.
double sigma_rule(const GapScanReport& rep, double r);

// Solves (lambda - A_hat) g = f.
CVec resolvent_A(const FourierModeOperator& mode, cplx lambda, const CVec& f);

struct ResolventSample {
  double r = 0, tau = 0;
  double weighted_ratio = 0;  // ||g||_a / ||f||_{a^-1}, bound 2 / nu0
  double plain_ratio = 0;     // ||g|| / ||f||, bound 2 / nu1
};
struct ResolventBoundReport {
  std::vector<ResolventSample> samples;
  double bound_weighted = 0, bound_plain = 0;
  double max_weighted = 0, max_plain = 0;
  bool holds = false;
};
// n seeded samples at Re lambda = -nu1 / 2 with r in [0, r_max], tau in [-tau_max, tau_max].
ResolventBoundReport resolvent_bound_check(const DispersionContext& ctx, int n, unsigned long long seed,
                                           double r_max = 10.0, double tau_max = 50.0);

struct ResolventKEntry {
  double r = 0, tau = 0, norm = 0;
};
struct ResolventKReport {
  std::vector<ResolventKEntry> table;
  double spearman = 0.0;   // norm against r + |tau|
  double threshold = 0.0;  // smallest r + |tau| beyond which every norm is < 1/2
  bool threshold_found = false;
};
// ||(lambda - A_hat)^{-1} K||_2 at lambda = -nu1 + i tau.
ResolventKReport resolvent_K_decay(const DispersionContext& ctx, const std::vector<double>& r_list,
                                   const std::vector<double>& tau_list);

struct UniformResolventReport {
  double sup_plain = 0, sup_weighted = 0;
  double sup_plain_refined = 0, sup_weighted_refined = 0;
  double refinement_change = 0;  // relative change of the larger of the two sups
  bool all_resolvable = true;
};
// Sup of the plain and weighted resolvent norms along Re lambda = -sigma_r on an
// (r, tau) lattice, maximized locally in tau, then repeated on a 2x finer lattice.
// Both one-sided limits at the jump r = y0 of sigma_r are included.
UniformResolventReport uniform_resolvent_scan(const DispersionContext& ctx, const GapScanReport& gap, double r_max,
                                              double tau_max, int n_r, int n_tau);

// Spectrum of B(r w) for a random unit direction w against B(r e1); returns the
// largest eigenvalue mismatch.
double rotation_spot_check(const DispersionContext& ctx, double r, unsigned long long seed);

}  // namespace kspec
