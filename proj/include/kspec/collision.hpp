// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "kspec/collision_quadrature.hpp"
#include "kspec/types.hpp"
#include "kspec/velocity_basis.hpp"

namespace kspec {

enum class CollisionBackend { dirichlet_quadrature, maxwell_diagonal };

const char* backend_name(CollisionBackend b);
CollisionBackend backend_from_name(const std::string& name);

struct CollisionKernelSpec {
  double gamma = 0.0;
  double s = 0.5;
  int d = 3;
  double b_amplitude = 1.0;
  double theta_floor = 1e-3;
  CollisionBackend backend = CollisionBackend::maxwell_diagonal;
  // Angular cutoff: b = b_amplitude on (0, pi/2] instead of the singular profile.
  bool cutoff = false;

  void validate() const;
  // b(cos theta) on (0, pi/2]; zero beyond.
  double b(double theta) const;
};

struct ConvergenceReport {
  bool checked = false;
  bool converged = true;
  double max_change = 0.0;  // max entry change under sigma-grid doubling
  double tolerance = 1e-4;
};

struct AssemblyOptions {
  CollisionGridParams grid;
  bool check_convergence = true;
  double tolerance = 1e-4;
  // Throw NumericalError instead of only flagging non-convergence.
  bool strict = false;
};

struct LinearizedOperator {
  Mat L;
  Mat A;
  Mat K;
  double nu0_disc = 0.0;
  double nu1_disc = 0.0;
  double C1_disc = 1.0;
  bool nu0_weighted = false;
  HermiteBasis basis;
  CollisionKernelSpec kernel;
  ConvergenceReport convergence;
  // Entry-level accuracy of L used by kernel tests: the doubling change for
  // the quadrature backend, round-off level for the diagonal backend.
  double quadrature_tolerance = 0.0;
};

// Linearized operator through the Dirichlet form
// (L f, f) = -1/4 int B mu mu_* (g' + g'_* - g - g_*)^2, g = f / mu^{1/2}.
// Only L, basis, kernel and the convergence fields are filled; see split_AK.
LinearizedOperator assemble_L(const HermiteBasis& basis, const CollisionKernelSpec& spec,
                              const AssemblyOptions& opt = {});

// The Dirichlet-form matrix alone for a given grid.
Mat assemble_L_dirichlet(const HermiteBasis& basis, const CollisionKernelSpec& spec, const CollisionGridParams& grid);

// Maxwell molecules (gamma = 0): diagonal in Burnett functions
// L_n^{(l+1/2)}(|v|^2/2) |v|^l Y_lm(v/|v|) mu^{1/2}.
struct BurnettMode {
  int n, l, m;
};

struct MaxwellDiagonal {
  std::vector<BurnettMode> modes;
  Vec eigenvalues;
  Mat change_of_basis;  // column k: Burnett mode k in Hermite coordinates
};

double maxwell_eigenvalue(int n, int l, const CollisionKernelSpec& spec);
MaxwellDiagonal maxwell_diagonal(const HermiteBasis& basis, const CollisionKernelSpec& spec);
LinearizedOperator assemble_L_maxwell_diagonal(const HermiteBasis& basis, const CollisionKernelSpec& spec);

struct SplitAK {
  Mat A;
  Mat K;
  double nu0_disc = 0.0;
  double nu1_disc = 0.0;
  double C1_disc = 1.0;
  bool weighted = false;
};

// K = P0 <v>^{gamma+2s} P0 and A = K - L. With M_a the coercivity constant is
// the smallest generalized eigenvalue of (A, M_a) and C1 = lambda_max(M_a^{-1});
// without it both refer to plain L^2.
SplitAK split_AK(const Mat& L, const HermiteBasis& basis, double gamma, double s, const Mat* M_a = nullptr);
void apply_split(LinearizedOperator& op, const Mat* M_a = nullptr);

// Eigenvalue gap of L: minus the largest eigenvalue outside the d+2 closest to 0.
double spectral_gap(const LinearizedOperator& op);

// Symmetrized bilinear term: G[alpha, beta, kappa] = (Gamma_s(phi_alpha, phi_beta), phi_kappa)
// with Gamma_s(f, g) = (Gamma(f, g) + Gamma(g, f)) / 2.
struct GammaTensor {
  int nb = 0;
  Mat data;  // row alpha * nb + beta, column kappa
  CollisionKernelSpec kernel;
  ConvergenceReport convergence;

  double operator()(int a, int b, int k) const { return data(a * nb + b, k); }
  Vec apply(const Vec& f, const Vec& g) const;
  CVec apply(const CVec& f, const CVec& g) const;
  // max |sum_kappa G[a,b,kappa] psi_i(kappa)| relative to max |G|.
  double invariance_defect(const HermiteBasis& basis) const;
};

GammaTensor assemble_gamma_tensor(const HermiteBasis& basis, const CollisionKernelSpec& spec,
                                  const AssemblyOptions& opt = {});
Mat assemble_gamma_raw(const HermiteBasis& basis, const CollisionKernelSpec& spec, const CollisionGridParams& grid);

// Grid parameters after one sigma-grid doubling.
CollisionGridParams doubled_sigma_grid(const CollisionGridParams& p, const CollisionKernelSpec& spec);

}  // namespace kspec
