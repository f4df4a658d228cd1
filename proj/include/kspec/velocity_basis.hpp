// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "kspec/types.hpp"

namespace kspec {

namespace detail {
struct SqrtTable {
  static constexpr int size = 128;
  double root[size];
  double inv_root[size];
  SqrtTable() {
    for (int n = 0; n < size; ++n) {
      root[n] = std::sqrt(double(n));
      inv_root[n] = n > 0 ? 1.0 / root[n] : 0.0;
    }
  }
};
inline const SqrtTable& sqrt_table() {
  static const SqrtTable t;
  return t;
}
}  // namespace detail

// Normalized probabilists' Hermite polynomials h_n = He_n / sqrt(n!) for
// n = 0..N at x, written to out[0..N].
template <class T>
inline void hermite_table(T x, int N, T* out) {
  out[0] = T(1);
  if (N >= 1) out[1] = x;
  if (N + 1 < detail::SqrtTable::size) {
    const detail::SqrtTable& st = detail::sqrt_table();
    for (int n = 1; n < N; ++n) out[n + 1] = (x * out[n] - st.root[n] * out[n - 1]) * st.inv_root[n + 1];
    return;
  }
  for (int n = 1; n < N; ++n)
    out[n + 1] = (x * out[n] - std::sqrt(double(n)) * out[n - 1]) / std::sqrt(double(n + 1));
}

// Orthonormal Hermite functions phi_alpha = H_alpha(v) mu^{1/2}(v) with
// |alpha| <= N, mu(v) = (2 pi)^{-d/2} exp(-|v|^2/2).
class HermiteBasis {
 public:
  int dim_v = 0;
  int max_degree = 0;
  int quad_order = 0;
  // Row k is the multi-index of basis function k (graded, then lexicographically
  // descending within a degree).
  Eigen::MatrixXi index_set;
  // Tensor Gauss-Hermite grid, one node per column, weights for
  // int g(v) exp(-|v|^2/2) dv.
  Mat quad_nodes;
  Vec quad_weights;

  int size() const { return static_cast<int>(index_set.rows()); }
  int degree(int k) const { return index_set.row(k).sum(); }
  // Position of a multi-index, or -1 if not in the basis.
  int index_of(const std::vector<int>& alpha) const;

  // Polynomial parts H_alpha(v) for every basis function; out has size().
  void eval_poly(const double* v, double* out) const;
  Vec eval_poly(const Vec& v) const;
  // Full basis functions phi_alpha(v).
  Vec eval(const Vec& v) const;

 private:
  friend HermiteBasis build_basis(int, int, int);
  std::vector<int> flat_;  // index_set flattened as k*d + i
};

HermiteBasis build_basis(int d, int N, int quad_order);

// Tensor Gauss-Hermite grid for weight exp(-|v|^2/2) with n nodes per axis.
void tensor_hermite_grid(int d, int n, Mat& nodes, Vec& weights);

// Columns psi_0..psi_{d+1} of Ker L expanded in the basis.
struct KernelVectors {
  Mat columns;
};
KernelVectors kernel_vectors(const HermiteBasis& basis);

struct Projectors {
  Mat P0;
  Mat P1;
};
Projectors projection_P0(const HermiteBasis& basis);

// Multiplication by v_axis (0-based) compressed onto the basis.
Mat multiply_by_v(const HermiteBasis& basis, int axis);
Mat multiply_by_v1(const HermiteBasis& basis);

// Multiplication by <v>^p (d <= 3) on a spherical product grid with graded
// radial panels; a radial refinement is compared and reported through diag.
Mat weight_matrix(const HermiteBasis& basis, double p, Diagnostics* diag = nullptr);

// (v_1 psi_j, psi_k) for the kernel vectors.
Mat reduced_stream_matrix(const HermiteBasis& basis);

// Matrix of f -> f(R v). Throws ConfigError when R is not orthogonal.
Mat rotation_representation(const HermiteBasis& basis, const Mat& R);

// Coefficients (f, phi_alpha) of a function by tensor Gauss-Hermite
// quadrature with n nodes per axis. f should decay like mu^{1/2}.
Vec project_function(const HermiteBasis& basis, const std::function<double(const Vec&)>& f, int n);

}  // namespace kspec
