// SPDX-License-Identifier: Apache-2.0
#include "kspec/collision.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace kspec {

const char* backend_name(CollisionBackend b) {
  return b == CollisionBackend::dirichlet_quadrature ? "dirichlet_quadrature" : "maxwell_diagonal";
}

CollisionBackend backend_from_name(const std::string& name) {
  if (name == "dirichlet_quadrature") return CollisionBackend::dirichlet_quadrature;
  if (name == "maxwell_diagonal") return CollisionBackend::maxwell_diagonal;
  throw ConfigError("unknown collision backend '" + name + "'");
}

void CollisionKernelSpec::validate() const {
  if (d < 1) throw ConfigError("kernel: d must be >= 1");
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("kernel: s must lie in (0, 1)");
  if (gamma + 2.0 * s < 0.0) throw ConfigError("kernel: hard potential required (gamma + 2s >= 0)");
  if (!(b_amplitude > 0.0)) throw ConfigError("kernel: b_amplitude must be positive");
  if (!(theta_floor > 0.0 && theta_floor < 0.25 * pi)) throw ConfigError("kernel: theta_floor must lie in (0, pi/4)");
}

double CollisionKernelSpec::b(double theta) const {
  if (theta <= 0.0 || theta > 0.5 * pi) return 0.0;
  if (cutoff) return b_amplitude;
  return b_amplitude * std::pow(theta, -(d - 1) - 2.0 * s);
}

namespace {

constexpr double inv_2pi_cubed = 1.0 / (8.0 * pi * pi * pi);

struct SigmaDirs {
  std::vector<Vec3> dir;
  std::vector<double> w;
};

SigmaDirs sigma_dirs(const SigmaRule& rule, const Vec3& u) {
  Vec3 e1, e2;
  orthonormal_frame(u, e1, e2);
  SigmaDirs out;
  const int na = rule.n_azimuth;
  out.dir.reserve(rule.theta.size() * na);
  out.w.reserve(rule.theta.size() * na);
  for (size_t i = 0; i < rule.theta.size(); ++i) {
    const double ct = std::cos(rule.theta[i]), st = std::sin(rule.theta[i]);
    for (int j = 0; j < na; ++j) {
      const double cp = std::cos(2.0 * pi * j / na), sp = std::sin(2.0 * pi * j / na);
      Vec3 s;
      for (int k = 0; k < 3; ++k) s[k] = ct * u[k] + st * (cp * e1[k] + sp * e2[k]);
      out.dir.push_back(s);
      out.w.push_back(rule.weight[i]);
    }
  }
  return out;
}

void check_basis(const HermiteBasis& basis, const CollisionKernelSpec& spec) {
  spec.validate();
  if (basis.dim_v != 3 || spec.d != 3) throw ConfigError("collision assembly supports d = 3 only");
}

}  // namespace

Mat assemble_L_dirichlet(const HermiteBasis& basis, const CollisionKernelSpec& spec, const CollisionGridParams& gp) {
  check_basis(basis, spec);
  const CollisionGrid grid = make_collision_grid(spec, basis.max_degree, gp);
  const int nb = basis.size();
  const int ns = static_cast<int>(grid.sigma.theta.size()) * grid.sigma.n_azimuth;
  const int per_batch = std::max(1, 4096 / ns);
  Mat D(nb, static_cast<Eigen::Index>(ns) * per_batch);
  Mat S = Mat::Zero(nb, nb);
  Vec pv(nb), ps(nb), pa(nb), pb(nb), base(nb);

  for (const RelativeNode& rel : grid.relative) {
    const SigmaDirs sd = sigma_dirs(grid.sigma, rel.dir);
    const double h = 0.5 * rel.rho;
    int col = 0;
    for (const CenterNode& c : grid.center) {
      double v[3], vs[3];
      for (int k = 0; k < 3; ++k) {
        v[k] = c.V[k] + h * rel.dir[k];
        vs[k] = c.V[k] - h * rel.dir[k];
      }
      basis.eval_poly(v, pv.data());
      basis.eval_poly(vs, ps.data());
      base = pv + ps;
      const double wcr = c.w * rel.w;
      for (int q = 0; q < ns; ++q) {
        for (int k = 0; k < 3; ++k) {
          v[k] = c.V[k] + h * sd.dir[q][k];
          vs[k] = c.V[k] - h * sd.dir[q][k];
        }
        basis.eval_poly(v, pa.data());
        basis.eval_poly(vs, pb.data());
        D.col(col++) = std::sqrt(wcr * sd.w[q]) * (pa + pb - base);
      }
      if (col + ns > D.cols()) {
        S.selfadjointView<Eigen::Lower>().rankUpdate(D.leftCols(col));
        col = 0;
      }
    }
    if (col > 0) S.selfadjointView<Eigen::Lower>().rankUpdate(D.leftCols(col));
  }
  Mat L = S.selfadjointView<Eigen::Lower>();
  L *= -0.25 * inv_2pi_cubed;
  return L;
}

CollisionGridParams doubled_sigma_grid(const CollisionGridParams& p, const CollisionKernelSpec& spec) {
  CollisionGridParams q = p;
  q.gl_per_panel = 2 * p.gl_per_panel;
  q.theta_floor = 0.5 * (p.theta_floor > 0.0 ? p.theta_floor : spec.theta_floor);
  return q;
}

LinearizedOperator assemble_L(const HermiteBasis& basis, const CollisionKernelSpec& spec, const AssemblyOptions& opt) {
  if (spec.backend == CollisionBackend::maxwell_diagonal) return assemble_L_maxwell_diagonal(basis, spec);
  LinearizedOperator op;
  op.basis = basis;
  op.kernel = spec;
  op.L = assemble_L_dirichlet(basis, spec, opt.grid);
  op.convergence.tolerance = opt.tolerance;
  if (opt.check_convergence) {
    const Mat fine = assemble_L_dirichlet(basis, spec, doubled_sigma_grid(opt.grid, spec));
    op.convergence.checked = true;
    op.convergence.max_change = (fine - op.L).cwiseAbs().maxCoeff();
    op.convergence.converged = op.convergence.max_change <= opt.tolerance;
    if (!op.convergence.converged && opt.strict) {
      std::ostringstream os;
      os << "assemble_L: sigma-grid doubling changes entries by " << op.convergence.max_change << " > "
         << opt.tolerance;
      throw NumericalError(os.str());
    }
  }
  op.quadrature_tolerance = std::max(op.convergence.max_change, 1e-12 * op.L.cwiseAbs().maxCoeff());
  return op;
}

SplitAK split_AK(const Mat& L, const HermiteBasis& basis, double gamma, double s, const Mat* M_a) {
  if (gamma + 2.0 * s < 0.0) throw ConfigError("split_AK: hard potential required (gamma + 2s >= 0)");
  const Mat W = weight_matrix(basis, gamma + 2.0 * s);
  const Mat P0 = projection_P0(basis).P0;
  SplitAK out;
  out.K = P0 * W * P0;
  out.K = 0.5 * (out.K + out.K.transpose()).eval();
  out.A = out.K - L;
  Eigen::SelfAdjointEigenSolver<Mat> es(out.A, Eigen::EigenvaluesOnly);
  const double amin = es.eigenvalues()(0);
  if (!(amin > 0.0)) {
    std::ostringstream os;
    os << "split_AK: lambda_min(A) = " << amin << " <= 0 (assembly error)";
    throw NumericalError(os.str());
  }
  if (M_a) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(out.A, *M_a, Eigen::EigenvaluesOnly);
    if (ges.info() != Eigen::Success) throw NumericalError("split_AK: generalized eigensolve failed");
    out.nu0_disc = ges.eigenvalues()(0);
    Eigen::SelfAdjointEigenSolver<Mat> ms(*M_a, Eigen::EigenvaluesOnly);
    out.C1_disc = 1.0 / ms.eigenvalues()(0);
    out.weighted = true;
  } else {
    out.nu0_disc = amin;
    out.C1_disc = 1.0;
  }
  out.nu1_disc = std::min(0.5 * out.nu0_disc, out.nu0_disc / (2.0 * out.C1_disc));
  return out;
}

void apply_split(LinearizedOperator& op, const Mat* M_a) {
  SplitAK sp = split_AK(op.L, op.basis, op.kernel.gamma, op.kernel.s, M_a);
  op.A = std::move(sp.A);
  op.K = std::move(sp.K);
  op.nu0_disc = sp.nu0_disc;
  op.nu1_disc = sp.nu1_disc;
  op.C1_disc = sp.C1_disc;
  op.nu0_weighted = sp.weighted;
}

double spectral_gap(const LinearizedOperator& op) {
  Eigen::SelfAdjointEigenSolver<Mat> es(op.L, Eigen::EigenvaluesOnly);
  const Vec ev = es.eigenvalues();  // ascending
  const int n = static_cast<int>(ev.size()), nk = op.basis.dim_v + 2;
  if (n <= nk) return 0.0;
  return -ev(n - nk - 1);
}

Mat assemble_gamma_raw(const HermiteBasis& basis, const CollisionKernelSpec& spec, const CollisionGridParams& gp) {
  check_basis(basis, spec);
  const CollisionGrid grid = make_collision_grid(spec, basis.max_degree, trilinear_grid_params(gp, basis.max_degree));
  const int nb = basis.size();
  const int ns = static_cast<int>(grid.sigma.theta.size()) * grid.sigma.n_azimuth;
  constexpr int batch = 64;
  Mat X(static_cast<Eigen::Index>(nb) * nb, batch);
  Mat Dbar(nb, batch);
  Mat G = Mat::Zero(static_cast<Eigen::Index>(nb) * nb, nb);
  Vec pv(nb), ps(nb), pa(nb), pb(nb), base(nb), acc(nb);
  int col = 0;
  auto flush = [&]() {
    if (col == 0) return;
    G.noalias() += X.leftCols(col) * Dbar.leftCols(col).transpose();
    col = 0;
  };

  for (const RelativeNode& rel : grid.relative) {
    const SigmaDirs sd = sigma_dirs(grid.sigma, rel.dir);
    const double h = 0.5 * rel.rho;
    for (const CenterNode& c : grid.center) {
      double v[3], vs[3];
      for (int k = 0; k < 3; ++k) {
        v[k] = c.V[k] + h * rel.dir[k];
        vs[k] = c.V[k] - h * rel.dir[k];
      }
      basis.eval_poly(v, pv.data());
      basis.eval_poly(vs, ps.data());
      base = pv + ps;
      acc.setZero();
      for (int q = 0; q < ns; ++q) {
        for (int k = 0; k < 3; ++k) {
          v[k] = c.V[k] + h * sd.dir[q][k];
          vs[k] = c.V[k] - h * sd.dir[q][k];
        }
        basis.eval_poly(v, pa.data());
        basis.eval_poly(vs, pb.data());
        acc += sd.w[q] * (pa + pb - base);
      }
      const double w = 0.25 * inv_2pi_cubed * c.w * rel.w;
      Eigen::Map<Mat> Sx(X.col(col).data(), nb, nb);
      Sx.noalias() = w * (pv * ps.transpose());
      Sx += Sx.transpose().eval();
      Dbar.col(col) = acc;
      if (++col == batch) flush();
    }
  }
  flush();
  return G;
}

GammaTensor assemble_gamma_tensor(const HermiteBasis& basis, const CollisionKernelSpec& spec,
                                  const AssemblyOptions& opt) {
  GammaTensor g;
  g.nb = basis.size();
  g.kernel = spec;
  g.data = assemble_gamma_raw(basis, spec, opt.grid);
  g.convergence.tolerance = opt.tolerance;
  if (opt.check_convergence) {
    const Mat fine = assemble_gamma_raw(basis, spec, doubled_sigma_grid(opt.grid, spec));
    g.convergence.checked = true;
    g.convergence.max_change = (fine - g.data).cwiseAbs().maxCoeff();
    g.convergence.converged = g.convergence.max_change <= opt.tolerance;
    if (!g.convergence.converged && opt.strict) {
      std::ostringstream os;
      os << "assemble_gamma_tensor: sigma-grid doubling changes entries by " << g.convergence.max_change;
      throw NumericalError(os.str());
    }
  }
  return g;
}

Vec GammaTensor::apply(const Vec& f, const Vec& g) const {
  const Mat fg = g * f.transpose();  // (beta, alpha) -> index alpha * nb + beta
  return data.transpose() * Eigen::Map<const Vec>(fg.data(), fg.size());
}

CVec GammaTensor::apply(const CVec& f, const CVec& g) const {
  const CMat fg = g * f.transpose();
  const Eigen::Map<const CVec> x(fg.data(), fg.size());
  CVec out(nb);
  out.real() = data.transpose() * x.real();
  out.imag() = data.transpose() * x.imag();
  return out;
}

double GammaTensor::invariance_defect(const HermiteBasis& basis) const {
  const Mat psi = kernel_vectors(basis).columns;
  const double scale = data.cwiseAbs().maxCoeff();
  return (data * psi).cwiseAbs().maxCoeff() / (scale > 0.0 ? scale : 1.0);
}

}  // namespace kspec
