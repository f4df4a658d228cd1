// SPDX-License-Identifier: Apache-2.0
#include "kspec/collision_quadrature.hpp"

#include <cmath>

#include "kspec/collision.hpp"
#include "kspec/quadrature.hpp"

namespace kspec {

void orthonormal_frame(const Vec3& u, Vec3& e1, Vec3& e2) {
  // Cross with the coordinate axis least aligned with u.
  int k = 0;
  if (std::abs(u[1]) < std::abs(u[k])) k = 1;
  if (std::abs(u[2]) < std::abs(u[k])) k = 2;
  Vec3 a{0.0, 0.0, 0.0};
  a[k] = 1.0;
  e1 = {u[1] * a[2] - u[2] * a[1], u[2] * a[0] - u[0] * a[2], u[0] * a[1] - u[1] * a[0]};
  const double n = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (double& x : e1) x /= n;
  e2 = {u[1] * e1[2] - u[2] * e1[1], u[2] * e1[0] - u[0] * e1[2], u[0] * e1[1] - u[1] * e1[0]};
}

SigmaRule make_sigma_rule(const CollisionKernelSpec& spec, int N, int gl_per_panel, double theta_floor,
                          int n_sigma_azimuth) {
  if (gl_per_panel < 1) throw ConfigError("sigma rule: gl_per_panel must be positive");
  SigmaRule rule;
  rule.n_azimuth = n_sigma_azimuth > 0 ? n_sigma_azimuth : 2 * N + 1;
  const double az = 2.0 * pi / rule.n_azimuth;

  std::vector<std::pair<double, double>> panels;
  double hi = 0.5 * pi;
  while (0.5 * hi > theta_floor) {
    panels.emplace_back(0.5 * hi, hi);
    hi *= 0.5;
  }
  panels.emplace_back(spec.cutoff ? 0.0 : theta_floor, hi);
  rule.n_panels = static_cast<int>(panels.size());

  size_t inner_begin = 0;
  for (const auto& [lo, up] : panels) {
    const int extra = std::max(0, static_cast<int>(std::ceil(N * (up - lo) / 2.0)) - 1);
    const Rule1D g = gauss_legendre(gl_per_panel + extra, lo, up);
    inner_begin = rule.theta.size();
    for (int i = 0; i < g.size(); ++i) {
      rule.theta.push_back(g.x[i]);
      rule.weight.push_back(g.w[i] * spec.b(g.x[i]) * std::sin(g.x[i]) * az);
    }
  }

  if (!spec.cutoff) {
    // The azimuthally averaged integrand behaves like theta^2 near 0; give the
    // innermost panel the mass of (0, theta_floor) under that profile.
    const double tf = theta_floor, e = 2.0 - 2.0 * spec.s;
    const double tail = spec.b_amplitude * (std::pow(tf, e) / e - std::pow(tf, e + 2.0) / (6.0 * (e + 2.0)));
    double panel = 0.0;
    for (size_t i = inner_begin; i < rule.theta.size(); ++i)
      panel += rule.weight[i] / az * rule.theta[i] * rule.theta[i];
    const double scale = 1.0 + tail / panel;
    for (size_t i = inner_begin; i < rule.theta.size(); ++i) rule.weight[i] *= scale;
    rule.tail = tail;
  }
  return rule;
}

CollisionGridParams trilinear_grid_params(const CollisionGridParams& p, int N) {
  CollisionGridParams q = p;
  if (q.n_center <= 0) q.n_center = (3 * N + 2) / 2;
  if (q.n_radial <= 0) q.n_radial = (3 * N / 2) / 2 + 1;
  if (q.n_polar <= 0) q.n_polar = (3 * N + 2) / 2;
  if (q.n_azimuth <= 0) q.n_azimuth = 3 * N + 2;
  return q;
}

CollisionGrid make_collision_grid(const CollisionKernelSpec& spec, int N, const CollisionGridParams& p) {
  if (spec.d != 3) throw ConfigError("collision quadrature is implemented for d = 3 only");
  CollisionGrid grid;

  const int nc = p.n_center > 0 ? p.n_center : N + 1;
  const Rule1D gh = gauss_hermite(nc);
  const double s2 = std::sqrt(2.0);
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < nc; ++j)
      for (int k = 0; k < nc; ++k)
        grid.center.push_back({{gh.x[i] / s2, gh.x[j] / s2, gh.x[k] / s2}, gh.w[i] * gh.w[j] * gh.w[k] / (2.0 * s2)});

  const int nr = p.n_radial > 0 ? p.n_radial : N / 2 + 1;
  const int np = p.n_polar > 0 ? p.n_polar : N + 1;
  int na = p.n_azimuth > 0 ? p.n_azimuth : 2 * N + 2;
  if (p.antipodal_half && na % 2 != 0) ++na;
  const Rule1D lag = gauss_laguerre(nr, 0.5 * (1.0 + spec.gamma));
  const Rule1D leg = gauss_legendre(np);
  const double rw = std::pow(2.0, 2.0 + spec.gamma);
  for (int a = 0; a < nr; ++a) {
    const double rho = 2.0 * std::sqrt(lag.x[a]);
    for (int i = 0; i < np; ++i) {
      const double ct = leg.x[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      for (int j = 0; j < na; ++j) {
        double w = rw * lag.w[a] * leg.w[i] * 2.0 * pi / na;
        if (p.antipodal_half) {
          const int ia = np - 1 - i, ja = (j + na / 2) % na;
          if (ia < i || (ia == i && ja < j)) continue;
          w *= 2.0;
        }
        const double ph = 2.0 * pi * j / na;
        grid.relative.push_back({rho, {st * std::cos(ph), st * std::sin(ph), ct}, w});
      }
    }
  }

  const double floor = p.theta_floor > 0.0 ? p.theta_floor : spec.theta_floor;
  grid.sigma = make_sigma_rule(spec, N, p.gl_per_panel, floor, p.n_sigma_azimuth);
  return grid;
}

}  // namespace kspec
