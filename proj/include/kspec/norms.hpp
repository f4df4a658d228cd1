// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "kspec/collision.hpp"
#include "kspec/symbols.hpp"

namespace kspec {

// The dissipation norms are quadratic in the basis coefficients c; each is
// returned as a symmetric matrix so that norm^2 = c^T M c.

// |||f|||^2 = int B mu_* (f' - f)^2 + int B f_*^2 ((mu')^{1/2} - mu^{1/2})^2.
struct TripleNormParts {
  Mat first;   // mu_* (f' - f)^2 term
  Mat second;  // f_*^2 ((mu')^{1/2} - mu^{1/2})^2 term
  Mat total() const { return first + second; }
};
CollisionGridParams default_triple_grid(int N);
TripleNormParts triple_norm_matrix(const HermiteBasis& basis, const CollisionKernelSpec& spec,
                                   const CollisionGridParams& grid);
double triple_norm(const Vec& c, const Mat& T);

// |f|^2_{N^{s,gamma}} = ||<v>^{gamma/2+s} f||^2
//   + int int (<v><v'>)^{(gamma+2s+1)/2} (f' - f)^2 / d(v,v')^{d+2s} 1_{d(v,v') <= 1},
// d(v,v')^2 = |v - v'|^2 + (|v|^2 - |v'|^2)^2 / 4, with d < diag_floor excluded.
struct NsgOptions {
  int n_v = 0;          // Gauss-Hermite nodes per axis; 0 picks N + 4
  int n_polar = 0;      // 0 picks N + 4
  int n_azimuth = 0;    // 0 picks 2N + 8
  int gl_per_panel = 3;
  double diag_floor = 1e-3;
};
struct NsgParts {
  Mat weight;    // ||<v>^{gamma/2+s} f||^2
  Mat singular;  // double integral
  Mat total() const { return weight + singular; }
};
NsgParts nsg_norm_matrix(const HermiteBasis& basis, double gamma, double s, const NsgOptions& opt = {});
double nsg_norm(const Vec& c, const Mat& Nm);

// Relative change of the N^{s,gamma} matrix when diag_floor is halved.
double nsg_floor_sensitivity(const HermiteBasis& basis, double gamma, double s, const NsgOptions& opt = {});

struct NormFamilyMember {
  std::string id;
  Vec coeffs;
};
// Hermite modes, Gaussians at shifted centres and seeded random vectors.
std::vector<NormFamilyMember> default_norm_family(const HermiteBasis& basis, unsigned long long seed);

struct NormMatrices {
  Mat M_a;
  Mat triple;
  Mat nsg;
  Mat dirichlet_plus_weight;  // -L + W_{2l}
};

struct NormRow {
  std::string id;
  double norm_a = 0, norm_triple = 0, norm_nsg = 0, norm_dirichlet_plus_weight = 0;
};

struct RatioRange {
  double min = 0, max = 0;
};

struct NormEquivalenceReport {
  double l = 0;
  std::vector<NormRow> rows;
  std::map<std::string, RatioRange> ratios;  // key e.g. "a/triple"
};

NormEquivalenceReport norm_equivalence_report(const std::vector<NormFamilyMember>& family, const NormMatrices& m,
                                              double l);
// Largest relative change of any ratio bound between two reports.
double ratio_drift(const NormEquivalenceReport& base, const NormEquivalenceReport& refined);

}  // namespace kspec
