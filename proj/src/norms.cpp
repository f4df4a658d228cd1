// SPDX-License-Identifier: Apache-2.0
#include "kspec/norms.hpp"

#include <cmath>
#include <random>

#include "kspec/quadrature.hpp"

namespace kspec {

CollisionGridParams default_triple_grid(int N) {
  CollisionGridParams g;
  g.n_center = N + 3;
  g.n_radial = N / 2 + 3;
  g.n_polar = N + 3;
  g.n_azimuth = 2 * N + 4;
  g.n_sigma_azimuth = 2 * N + 3;
  g.gl_per_panel = 2;
  g.antipodal_half = false;
  return g;
}

TripleNormParts triple_norm_matrix(const HermiteBasis& basis, const CollisionKernelSpec& spec,
                                   const CollisionGridParams& gp_in) {
  spec.validate();
  if (basis.dim_v != 3) throw ConfigError("triple_norm_matrix: d = 3 only");
  CollisionGridParams gp = gp_in;
  gp.antipodal_half = false;  // the integrand is not symmetric under v <-> v_*
  const CollisionGrid grid = make_collision_grid(spec, basis.max_degree, gp);
  const int nb = basis.size();
  const int na = grid.sigma.n_azimuth;
  const int ns = static_cast<int>(grid.sigma.theta.size()) * na;
  const double c3 = 1.0 / (8.0 * pi * pi * pi);

  const int per_batch = std::max(1, 4096 / ns);
  Mat D1(nb, static_cast<Eigen::Index>(ns) * per_batch);
  Mat D2(nb, 256);
  Mat S1 = Mat::Zero(nb, nb), S2 = Mat::Zero(nb, nb);
  Vec pv(nb), ps(nb), pa(nb);
  int c1 = 0, c2 = 0;

  for (const RelativeNode& rel : grid.relative) {
    Vec3 e1, e2;
    orthonormal_frame(rel.dir, e1, e2);
    std::vector<Vec3> dirs;
    std::vector<double> ws;
    for (size_t i = 0; i < grid.sigma.theta.size(); ++i) {
      const double ct = std::cos(grid.sigma.theta[i]), st = std::sin(grid.sigma.theta[i]);
      for (int j = 0; j < na; ++j) {
        const double cp = std::cos(2.0 * pi * j / na), sp = std::sin(2.0 * pi * j / na);
        Vec3 s;
        for (int k = 0; k < 3; ++k) s[k] = ct * rel.dir[k] + st * (cp * e1[k] + sp * e2[k]);
        dirs.push_back(s);
        ws.push_back(grid.sigma.weight[i]);
      }
    }
    const double h = 0.5 * rel.rho;
    for (const CenterNode& c : grid.center) {
      double v[3], vs[3], vp[3];
      double v2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        v[k] = c.V[k] + h * rel.dir[k];
        vs[k] = c.V[k] - h * rel.dir[k];
        v2 += v[k] * v[k];
      }
      basis.eval_poly(v, pv.data());
      basis.eval_poly(vs, ps.data());
      const double wcr = c3 * c.w * rel.w;
      double w2 = 0.0;
      for (int q = 0; q < ns; ++q) {
        double vp2 = 0.0;
        for (int k = 0; k < 3; ++k) {
          vp[k] = c.V[k] + h * dirs[q][k];
          vp2 += vp[k] * vp[k];
        }
        const double ratio = std::exp(0.25 * (v2 - vp2));  // m(v') / m(v)
        basis.eval_poly(vp, pa.data());
        D1.col(c1++) = std::sqrt(wcr * ws[q]) * (ratio * pa - pv);
        w2 += ws[q] * (ratio - 1.0) * (ratio - 1.0);
      }
      D2.col(c2++) = std::sqrt(wcr * w2) * ps;
      if (c1 + ns > D1.cols()) {
        S1.selfadjointView<Eigen::Lower>().rankUpdate(D1.leftCols(c1));
        c1 = 0;
      }
      if (c2 == D2.cols()) {
        S2.selfadjointView<Eigen::Lower>().rankUpdate(D2);
        c2 = 0;
      }
    }
  }
  if (c1 > 0) S1.selfadjointView<Eigen::Lower>().rankUpdate(D1.leftCols(c1));
  if (c2 > 0) S2.selfadjointView<Eigen::Lower>().rankUpdate(D2.leftCols(c2));
  TripleNormParts out;
  out.first = S1.selfadjointView<Eigen::Lower>();
  out.second = S2.selfadjointView<Eigen::Lower>();
  return out;
}

double triple_norm(const Vec& c, const Mat& T) { return std::max(0.0, c.dot(T * c)); }

namespace {

// d(v, v + rho h)^2 with h a unit vector and cvh = v . h.
double dist2(double rho, double cvh) {
  const double x = cvh + 0.5 * rho;
  return rho * rho * (1.0 + x * x);
}

// d is increasing in rho on (0, 1]; solve d(rho) = target by bisection.
double solve_rho(double cvh, double target) {
  double lo = 0.0, hi = 1.0;
  const double t2 = target * target;
  if (dist2(hi, cvh) <= t2) return hi;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist2(mid, cvh) < t2 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Mat nsg_singular(const HermiteBasis& basis, double gamma, double s, const NsgOptions& opt) {
  const int d = basis.dim_v, N = basis.max_degree, nb = basis.size();
  if (d != 3) throw ConfigError("nsg_norm_matrix: d = 3 only");
  const int nv = opt.n_v > 0 ? opt.n_v : N + 4;
  const int np = opt.n_polar > 0 ? opt.n_polar : N + 4;
  const int na = opt.n_azimuth > 0 ? opt.n_azimuth : 2 * N + 8;
  Mat nodes;
  Vec wv;
  tensor_hermite_grid(3, nv, nodes, wv);
  const Rule1D leg = gauss_legendre(np);
  std::vector<Vec3> dirs;
  std::vector<double> wd;
  for (int i = 0; i < np; ++i) {
    const double ct = leg.x[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int j = 0; j < na; ++j) {
      const double ph = 2.0 * pi * j / na;
      dirs.push_back({st * std::cos(ph), st * std::sin(ph), ct});
      wd.push_back(leg.w[i] * 2.0 * pi / na);
    }
  }
  const Rule1D ref = gauss_legendre(opt.gl_per_panel, 0.0, 1.0);
  const double kappa = 0.5 * (gamma + 2.0 * s + 1.0);
  const double norm = std::pow(2.0 * pi, -1.5);

  Mat D(nb, 4096);
  Mat S = Mat::Zero(nb, nb);
  Vec pv(nb), pa(nb);
  int col = 0;
  for (Eigen::Index q = 0; q < nodes.cols(); ++q) {
    const double* v = nodes.col(q).data();
    const double v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    basis.eval_poly(v, pv.data());
    for (size_t k = 0; k < dirs.size(); ++k) {
      const Vec3& h = dirs[k];
      const double cvh = v[0] * h[0] + v[1] * h[1] + v[2] * h[2];
      const double lo = solve_rho(cvh, opt.diag_floor), hi = solve_rho(cvh, 1.0);
      if (!(hi > lo)) continue;
      // Geometric panels from lo to hi.
      double a = lo;
      while (a < hi) {
        const double b = std::min(hi, 2.0 * a);
        for (int g = 0; g < ref.size(); ++g) {
          const double rho = a + (b - a) * ref.x[g];
          const double wr = (b - a) * ref.w[g];
          double vp[3], vp2 = 0.0;
          for (int i = 0; i < 3; ++i) {
            vp[i] = v[i] + rho * h[i];
            vp2 += vp[i] * vp[i];
          }
          const double dd = std::sqrt(dist2(rho, cvh));
          const double w = wv(q) * wd[k] * wr * norm * rho * rho * std::pow((1.0 + v2) * (1.0 + vp2), 0.5 * kappa) /
                           std::pow(dd, 3.0 + 2.0 * s);
          basis.eval_poly(vp, pa.data());
          D.col(col++) = std::sqrt(w) * (std::exp(0.25 * (v2 - vp2)) * pa - pv);
          if (col == D.cols()) {
            S.selfadjointView<Eigen::Lower>().rankUpdate(D);
            col = 0;
          }
        }
        a = b;
      }
    }
  }
  if (col > 0) S.selfadjointView<Eigen::Lower>().rankUpdate(D.leftCols(col));
  return S.selfadjointView<Eigen::Lower>();
}

}  // namespace

NsgParts nsg_norm_matrix(const HermiteBasis& basis, double gamma, double s, const NsgOptions& opt) {
  if (!(opt.diag_floor > 0.0 && opt.diag_floor < 1.0)) throw ConfigError("nsg_norm: diag_floor must lie in (0, 1)");
  NsgParts out;
  out.weight = weight_matrix(basis, gamma + 2.0 * s);
  out.singular = nsg_singular(basis, gamma, s, opt);
  return out;
}

double nsg_norm(const Vec& c, const Mat& Nm) { return std::max(0.0, c.dot(Nm * c)); }

double nsg_floor_sensitivity(const HermiteBasis& basis, double gamma, double s, const NsgOptions& opt) {
  NsgOptions half = opt;
  half.diag_floor = 0.5 * opt.diag_floor;
  const Mat a = nsg_norm_matrix(basis, gamma, s, opt).total();
  const Mat b = nsg_norm_matrix(basis, gamma, s, half).total();
  return (b - a).norm() / a.norm();
}

std::vector<NormFamilyMember> default_norm_family(const HermiteBasis& basis, unsigned long long seed) {
  std::vector<NormFamilyMember> fam;
  const int nb = basis.size(), d = basis.dim_v, N = basis.max_degree;
  auto mode_id = [&](int k) {
    std::string id = "hermite_";
    for (int i = 0; i < d; ++i) id += std::to_string(basis.index_set(k, i));
    return id;
  };
  std::vector<int> picks;
  for (int k = 0; k < nb && basis.degree(k) <= 2; ++k) picks.push_back(k);
  for (int i = 0; i < d; ++i) {
    std::vector<int> a(d, 0);
    a[i] = N;
    picks.push_back(basis.index_of(a));
  }
  for (int k : picks) fam.push_back({mode_id(k), Vec::Unit(nb, k)});

  const double centers[4][3] = {{0.5, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.5, 0.5, 0.5}, {0.0, 0.0, 1.5}};
  for (int c = 0; c < 4; ++c) {
    auto f = [&](const Vec& v) {
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) {
        const double x = v(i) - (i < 3 ? centers[c][i] : 0.0);
        r2 += x * x;
      }
      return std::pow(2.0 * pi, -0.25 * d) * std::exp(-0.25 * r2);
    };
    fam.push_back({"gaussian_" + std::to_string(c), project_function(basis, f, N + 10)});
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int r = 0; r < 6; ++r) {
    Vec c(nb);
    for (int k = 0; k < nb; ++k) c(k) = nd(rng) / ((1.0 + basis.degree(k)) * (1.0 + basis.degree(k)));
    fam.push_back({"random_" + std::to_string(r), c});
  }
  return fam;
}

NormEquivalenceReport norm_equivalence_report(const std::vector<NormFamilyMember>& family, const NormMatrices& m,
                                              double l) {
  NormEquivalenceReport rep;
  rep.l = l;
  for (const NormFamilyMember& f : family) {
    NormRow row;
    row.id = f.id;
    row.norm_a = std::max(0.0, f.coeffs.dot(m.M_a * f.coeffs));
    row.norm_triple = triple_norm(f.coeffs, m.triple);
    row.norm_nsg = nsg_norm(f.coeffs, m.nsg);
    row.norm_dirichlet_plus_weight = std::max(0.0, f.coeffs.dot(m.dirichlet_plus_weight * f.coeffs));
    rep.rows.push_back(row);
  }
  auto add = [&](const std::string& key, auto num, auto den) {
    RatioRange r{1e300, -1e300};
    for (const NormRow& row : rep.rows) {
      const double q = num(row) / den(row);
      r.min = std::min(r.min, q);
      r.max = std::max(r.max, q);
    }
    rep.ratios[key] = r;
  };
  auto A = [](const NormRow& r) { return r.norm_a; };
  auto T = [](const NormRow& r) { return r.norm_triple; };
  auto S = [](const NormRow& r) { return r.norm_nsg; };
  auto D = [](const NormRow& r) { return r.norm_dirichlet_plus_weight; };
  add("a/triple", A, T);
  add("a/nsg", A, S);
  add("a/dirichlet_plus_weight", A, D);
  add("triple/nsg", T, S);
  add("triple/dirichlet_plus_weight", T, D);
  add("nsg/dirichlet_plus_weight", S, D);
  return rep;
}

double ratio_drift(const NormEquivalenceReport& base, const NormEquivalenceReport& refined) {
  double drift = 0.0;
  for (const auto& [key, r] : base.ratios) {
    auto it = refined.ratios.find(key);
    if (it == refined.ratios.end()) continue;
    drift = std::max(drift, std::abs(it->second.min / r.min - 1.0));
    drift = std::max(drift, std::abs(it->second.max / r.max - 1.0));
  }
  return drift;
}

}  // namespace kspec
