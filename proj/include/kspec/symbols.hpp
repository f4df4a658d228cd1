// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "kspec/types.hpp"
#include "kspec/velocity_basis.hpp"

namespace kspec {

// a(v, eta) = <v>^gamma (1 + |eta|^2 + |eta ^ v|^2 + |v|^2)^s + K0 <v>^{gamma + 2s},
// |eta ^ v|^2 = |eta|^2 |v|^2 - (eta . v)^2.
double eval_symbol_a(const double* v, const double* eta, int d, double gamma, double s, double K0);
double eval_symbol_a(const Vec& v, const Vec& eta, double gamma, double s, double K0);

struct SymbolParams {
  double gamma = 0.0;
  double s = 0.5;
  double K0 = 10.0;
};

// Uniform phase-space grid for d in {1, 2}: n points per axis on
// v in [-v_extent, v_extent), eta on the conjugate grid with dv * deta * n = 1.
struct SymbolGrid {
  int dim = 1;
  double v_extent = 6.0;
  int n_points = 32;
  SymbolParams params;

  void validate() const;
  double dv() const { return 2.0 * v_extent / n_points; }
  double deta() const { return 1.0 / (n_points * dv()); }
  double eta_extent() const { return 0.5 * n_points * deta(); }
  Vec v_axis() const;
  Vec eta_axis() const;
  int size() const;  // n_points^dim
  // Coordinates of flattened grid point k (first axis fastest).
  void point(int k, double* out, const Vec& axis) const;
};

using PhaseSymbol = std::function<double(const double* v, const double* eta)>;

// A[j,k] = deta^d dv^d sum_m exp(2 pi i (v_j - v_k).eta_m) a((v_j + v_k)/2, eta_m).
// diag receives a warning when |a| on the boundary exceeds 1e-3 of its central value.
CMat weyl_quantize(const SymbolGrid& grid, const PhaseSymbol& symbol, Diagnostics* diag = nullptr);

struct WeightedGram {
  Mat M_a;           // Gram of ||(a^{+-1/2})^w .||^2 in the working basis
  Mat M_a_inv_gram;  // inverse of M_a
  double lambda_min = 0.0;
  double imag_defect = 0.0;  // largest discarded imaginary part (Galerkin path)
};

struct GalerkinSymbolOptions {
  int pad = 2;      // extra degrees kept in the output space of (a^{1/2})^w
  int n_x = 14;     // Gauss-Hermite nodes per axis in v
  int n_eta = 14;   // Gauss-Hermite nodes per axis in eta
};

// Galerkin matrix Q[alpha, beta] = ((sym)^w phi_beta, phi_alpha) with rows over
// |alpha| <= N + pad (row basis returned through rows if non-null).
Mat galerkin_symbol_matrix(const HermiteBasis& basis, const PhaseSymbol& symbol, const GalerkinSymbolOptions& opt,
                           HermiteBasis* rows = nullptr, double* imag_defect = nullptr);

// M = Q^T Q for the symbol a^{sign/2}. Throws NumericalError if lambda_min <= 0.
WeightedGram weighted_gram(const HermiteBasis& basis, const SymbolParams& p, int sign,
                           const GalerkinSymbolOptions& opt = {});
WeightedGram weighted_gram(const SymbolGrid& grid, int sign, Diagnostics* diag = nullptr);

// Smallest K0 in [0, K0_max] with lambda_min(M_a) >= target, by bisection.
struct K0Search {
  double K0_min = 0.0;
  double lambda_at_min = 0.0;
  int iterations = 0;
};
K0Search find_K0_min(const HermiteBasis& basis, SymbolParams p, const GalerkinSymbolOptions& opt,
                     double target = 1.0, double K0_max = 100.0, double tol = 1e-3);

}  // namespace kspec
