// SPDX-License-Identifier: Apache-2.0
#include "kspec/velocity_basis.hpp"

#include <cmath>
#include <sstream>

#include "kspec/quadrature.hpp"

namespace kspec {

namespace {

// All multi-indices of total degree exactly n in d variables, lexicographically
// descending.
void indices_of_degree(int d, int n, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  const int i = static_cast<int>(cur.size());
  if (i == d - 1) {
    cur.push_back(n);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = n; a >= 0; --a) {
    cur.push_back(a);
    indices_of_degree(d, n - a, cur, out);
    cur.pop_back();
  }
}

Mat poly_at_nodes(const HermiteBasis& basis, const Mat& nodes) {
  Mat H(basis.size(), nodes.cols());
  for (Eigen::Index q = 0; q < nodes.cols(); ++q) basis.eval_poly(nodes.col(q).data(), H.col(q).data());
  return H;
}

double mu_norm(int d) { return std::pow(2.0 * pi, -0.5 * d); }

}  // namespace

int HermiteBasis::index_of(const std::vector<int>& alpha) const {
  if (static_cast<int>(alpha.size()) != dim_v) return -1;
  for (int k = 0; k < size(); ++k) {
    bool eq = true;
    for (int i = 0; i < dim_v && eq; ++i) eq = index_set(k, i) == alpha[i];
    if (eq) return k;
  }
  return -1;
}

void HermiteBasis::eval_poly(const double* v, double* out) const {
  const int N = max_degree, d = dim_v, stride = N + 1;
  double tab[8 * 64];
  std::vector<double> heap;
  double* t = tab;
  if (d * stride > 8 * 64) {
    heap.resize(static_cast<size_t>(d) * stride);
    t = heap.data();
  }
  for (int i = 0; i < d; ++i) hermite_table(v[i], N, t + i * stride);
  const int nb = size();
  const int* f = flat_.data();
  if (d == 3) {
    const double *t0 = t, *t1 = t + stride, *t2 = t + 2 * stride;
    for (int k = 0; k < nb; ++k, f += 3) out[k] = t0[f[0]] * t1[f[1]] * t2[f[2]];
    return;
  }
  for (int k = 0; k < nb; ++k, f += d) {
    double p = 1.0;
    for (int i = 0; i < d; ++i) p *= t[i * stride + f[i]];
    out[k] = p;
  }
}

Vec HermiteBasis::eval_poly(const Vec& v) const {
  Vec out(size());
  eval_poly(v.data(), out.data());
  return out;
}

Vec HermiteBasis::eval(const Vec& v) const {
  return eval_poly(v) * (std::pow(2.0 * pi, -0.25 * dim_v) * std::exp(-0.25 * v.squaredNorm()));
}

void tensor_hermite_grid(int d, int n, Mat& nodes, Vec& weights) {
  const Rule1D r = gauss_hermite(n);
  long total = 1;
  for (int i = 0; i < d; ++i) total *= n;
  nodes.resize(d, total);
  weights.resize(total);
  std::vector<int> digit(d, 0);
  for (long q = 0; q < total; ++q) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      nodes(i, q) = r.x[digit[i]];
      w *= r.w[digit[i]];
    }
    weights(q) = w;
    for (int i = d - 1; i >= 0; --i) {
      if (++digit[i] < n) break;
      digit[i] = 0;
    }
  }
}

HermiteBasis build_basis(int d, int N, int quad_order) {
  if (d < 1) throw ConfigError("build_basis: dimension must be >= 1");
  if (N < 2) throw ConfigError("build_basis: max_degree must be >= 2 (kernel vectors need degree 2)");
  if (quad_order < N + 1) throw ConfigError("build_basis: quad_order must be >= max_degree + 1");
  HermiteBasis b;
  b.dim_v = d;
  b.max_degree = N;
  b.quad_order = quad_order;
  std::vector<std::vector<int>> all;
  for (int n = 0; n <= N; ++n) {
    std::vector<int> cur;
    indices_of_degree(d, n, cur, all);
  }
  b.index_set.resize(static_cast<Eigen::Index>(all.size()), d);
  b.flat_.reserve(all.size() * d);
  for (size_t k = 0; k < all.size(); ++k)
    for (int i = 0; i < d; ++i) {
      b.index_set(static_cast<Eigen::Index>(k), i) = all[k][i];
      b.flat_.push_back(all[k][i]);
    }
  tensor_hermite_grid(d, quad_order, b.quad_nodes, b.quad_weights);
  return b;
}

KernelVectors kernel_vectors(const HermiteBasis& basis) {
  const int d = basis.dim_v;
  KernelVectors kv;
  kv.columns = Mat::Zero(basis.size(), d + 2);
  std::vector<int> a(d, 0);
  kv.columns(basis.index_of(a), 0) = 1.0;
  for (int i = 0; i < d; ++i) {
    a.assign(d, 0);
    a[i] = 1;
    kv.columns(basis.index_of(a), i + 1) = 1.0;
    // v_i^2 - 1 = sqrt(2) h_2(v_i), so psi_{d+1} = sum_i phi_{2 e_i} / sqrt(d).
    a[i] = 2;
    kv.columns(basis.index_of(a), d + 1) = 1.0 / std::sqrt(double(d));
  }
  return kv;
}

Projectors projection_P0(const HermiteBasis& basis) {
  const Mat psi = kernel_vectors(basis).columns;
  Projectors p;
  p.P0 = psi * psi.transpose();
  p.P1 = Mat::Identity(basis.size(), basis.size()) - p.P0;
  return p;
}

Mat multiply_by_v(const HermiteBasis& basis, int axis) {
  if (axis < 0 || axis >= basis.dim_v) throw ConfigError("multiply_by_v: axis out of range");
  const int nb = basis.size();
  Mat V = Mat::Zero(nb, nb);
  std::vector<int> a(basis.dim_v);
  for (int k = 0; k < nb; ++k) {
    for (int i = 0; i < basis.dim_v; ++i) a[i] = basis.index_set(k, i);
    const int n = a[axis];
    a[axis] = n + 1;
    const int up = basis.index_of(a);
    if (up >= 0) {
      V(k, up) = std::sqrt(double(n + 1));
      V(up, k) = V(k, up);
    }
  }
  return V;
}

Mat multiply_by_v1(const HermiteBasis& basis) { return multiply_by_v(basis, 0); }

namespace {

// Spherical product rule for int g(v) exp(-|v|^2/2) dv: graded Gauss-Legendre
// panels in r (the weight <v>^p is analytic only within distance 1 of the real
// axis) and angular rules exact for polynomials of degree 2N + 1.
void radial_product_grid(int d, int N, int per_panel, Mat& nodes, Vec& weights) {
  const double R = std::sqrt(90.0 + 8.0 * N);
  const double edges[] = {0.0, 1.0, 2.0, 4.0, 7.0, R};
  std::vector<double> r, wr;
  for (int k = 0; k + 1 < 6; ++k) {
    const Rule1D g = gauss_legendre(per_panel, edges[k], edges[k + 1]);
    for (int i = 0; i < g.size(); ++i) {
      r.push_back(g.x[i]);
      wr.push_back(g.w[i] * std::exp(-0.5 * g.x[i] * g.x[i]) * std::pow(g.x[i], d - 1));
    }
  }
  std::vector<Vec> dirs;
  std::vector<double> wd;
  if (d == 1) {
    dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    wd = {1.0, 1.0};
  } else {
    const Rule1D az = trapezoid_periodic(2 * N + 2);
    const Rule1D pol = gauss_legendre(d == 3 ? N + 1 : 1);
    for (int j = 0; j < az.size(); ++j) {
      if (d == 2) {
        dirs.push_back((Vec(2) << std::cos(az.x[j]), std::sin(az.x[j])).finished());
        wd.push_back(az.w[j]);
        continue;
      }
      for (int i = 0; i < pol.size(); ++i) {
        const double ct = pol.x[i], st = std::sqrt(1.0 - ct * ct);
        dirs.push_back((Vec(3) << st * std::cos(az.x[j]), st * std::sin(az.x[j]), ct).finished());
        wd.push_back(az.w[j] * pol.w[i]);
      }
    }
  }
  nodes.resize(d, static_cast<Eigen::Index>(r.size() * dirs.size()));
  weights.resize(nodes.cols());
  Eigen::Index q = 0;
  for (size_t a = 0; a < r.size(); ++a)
    for (size_t b = 0; b < dirs.size(); ++b, ++q) {
      nodes.col(q) = r[a] * dirs[b];
      weights(q) = wr[a] * wd[b];
    }
}

}  // namespace

Mat weight_matrix(const HermiteBasis& basis, double p, Diagnostics* diag) {
  const int d = basis.dim_v;
  if (d > 3) throw ConfigError("weight_matrix: d <= 3 required");
  auto assemble = [&](int per_panel) {
    Mat nodes;
    Vec w;
    radial_product_grid(d, basis.max_degree, per_panel, nodes, w);
    Mat H = poly_at_nodes(basis, nodes);
    for (Eigen::Index q = 0; q < nodes.cols(); ++q)
      H.col(q) *= std::sqrt(w(q) * mu_norm(d) * std::pow(1.0 + nodes.col(q).squaredNorm(), 0.5 * p));
    Mat W = Mat::Zero(basis.size(), basis.size());
    W.selfadjointView<Eigen::Lower>().rankUpdate(H);
    return Mat(W.selfadjointView<Eigen::Lower>());
  };
  const int per_panel = 16 + basis.max_degree;
  const Mat W = assemble(per_panel);
  if (diag && p != 0.0) {
    const double change = (assemble(2 * per_panel) - W).cwiseAbs().maxCoeff();
    if (change > 1e-10) {
      std::ostringstream os;
      os << "weight_matrix: refinement changes entries by " << change << " (p = " << p << ")";
      diag->warn(os.str());
    }
  }
  return W;
}

Mat reduced_stream_matrix(const HermiteBasis& basis) {
  const Mat psi = kernel_vectors(basis).columns;
  return psi.transpose() * multiply_by_v1(basis) * psi;
}

Mat rotation_representation(const HermiteBasis& basis, const Mat& R) {
  const int d = basis.dim_v;
  if (R.rows() != d || R.cols() != d) throw ConfigError("rotation_representation: R has wrong shape");
  if ((R.transpose() * R - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("rotation_representation: R is not orthogonal");
  const Mat& nodes = basis.quad_nodes;
  Mat H = poly_at_nodes(basis, nodes);
  Mat HR = poly_at_nodes(basis, R * nodes);
  for (Eigen::Index q = 0; q < nodes.cols(); ++q) H.col(q) *= basis.quad_weights(q) * mu_norm(d);
  // Row alpha, column beta: (phi_beta(R .), phi_alpha).
  return H * HR.transpose();
}

Vec project_function(const HermiteBasis& basis, const std::function<double(const Vec&)>& f, int n) {
  Mat nodes;
  Vec w;
  tensor_hermite_grid(basis.dim_v, n, nodes, w);
  Vec c = Vec::Zero(basis.size());
  Vec h(basis.size());
  const double norm = std::pow(2.0 * pi, -0.25 * basis.dim_v);
  for (Eigen::Index q = 0; q < nodes.cols(); ++q) {
    const Vec v = nodes.col(q);
    basis.eval_poly(v.data(), h.data());
    // phi_alpha(v) = H_alpha mu^{1/2}; divide out the Gaussian weight.
    const double scale = w(q) * norm * std::exp(0.25 * v.squaredNorm()) * f(v);
    c += scale * h;
  }
  return c;
}

}  // namespace kspec
