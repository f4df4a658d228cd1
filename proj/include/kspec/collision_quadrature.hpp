// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "kspec/types.hpp"

namespace kspec {

struct CollisionKernelSpec;

// Quadrature for int int int B(v - v_*, sigma) mu mu_* F dsigma dv dv_* in d = 3,
// written in centre-of-mass coordinates V = (v + v_*)/2, u = v - v_*.
// mu mu_* = (2 pi)^{-3} exp(-|V|^2 - |u|^2/4) and |u|^gamma are absorbed into
// the node weights, so the integral is (2 pi)^{-3} sum w_V w_u w_sigma F.
using Vec3 = std::array<double, 3>;

struct CenterNode {
  Vec3 V;
  double w;
};

struct RelativeNode {
  double rho;  // |u|
  Vec3 dir;    // u / |u|
  double w;
};

// Polar angles theta in (0, pi/2] with weights b(theta) sin(theta) dtheta and
// a periodic azimuthal rule; sigma = cos(theta) u_hat + sin(theta)(cos(phi) e1 + sin(phi) e2).
struct SigmaRule {
  std::vector<double> theta;
  std::vector<double> weight;
  int n_azimuth = 0;
  int n_panels = 0;
  double tail = 0.0;  // mass assigned to (0, theta_floor) through the correction
};

struct CollisionGridParams {
  int n_center = 0;     // Gauss-Hermite nodes per axis for V; 0 picks N + 1
  int n_radial = 0;     // generalized Gauss-Laguerre nodes in |u|^2/4; 0 picks N/2 + 1
  int n_polar = 0;      // Gauss-Legendre nodes in cos of the u polar angle; 0 picks N + 1
  int n_azimuth = 0;    // trapezoid nodes for the u azimuth; 0 picks 2N + 2
  int n_sigma_azimuth = 0;  // trapezoid nodes for sigma; 0 picks 2N + 1
  int gl_per_panel = 4;     // Gauss-Legendre nodes per geometric theta panel
  double theta_floor = 0.0; // 0 takes the kernel value
  bool antipodal_half = true;  // keep one u of each (u, -u) pair with doubled weight
};

struct CollisionGrid {
  std::vector<CenterNode> center;
  std::vector<RelativeNode> relative;
  SigmaRule sigma;
};

// Fills unset centre and relative counts so that polynomial integrands of
// degree 3N (the trilinear term) are integrated exactly; the defaults above
// cover degree 2N.
CollisionGridParams trilinear_grid_params(const CollisionGridParams& p, int N);

CollisionGrid make_collision_grid(const CollisionKernelSpec& spec, int N, const CollisionGridParams& p);

SigmaRule make_sigma_rule(const CollisionKernelSpec& spec, int N, int gl_per_panel, double theta_floor,
                          int n_sigma_azimuth);

// Unit vectors e1, e2 completing dir to a right-handed orthonormal frame.
void orthonormal_frame(const Vec3& dir, Vec3& e1, Vec3& e2);

}  // namespace kspec
