// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "kspec/dispersion.hpp"

namespace kspec {

CVec propagate_expm(const FourierModeOperator& mode, const CVec& f0, double t);

enum class PropagatorMethod { expm, contour };

struct PropagatorConfig {
  std::vector<double> times;
  PropagatorMethod method = PropagatorMethod::contour;
  // Line Re lambda = -sigma2. NaN places it in the widest gap among 0 and the
  // eight rightmost real parts; eigenvalues to its right become residues.
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  double n_trunc = 0.0;    // half-height of the line; 0 picks it from the tail estimate
  double quad_step = 0.0;  // trapezoid step; 0 picks it from the distance to the spectrum
  int k_ibp = 2;
  double tail_tol = 1e-10;  // relative to the size of the result
};

struct ContourResult {
  std::vector<double> times;
  std::vector<CVec> f;
  std::vector<double> tail_estimate;
  std::vector<double> line_norm;  // norm of the line-integral part
  double sigma = 0.0;
  double distance = 0.0;  // from the line to the nearest eigenvalue
  double n_trunc = 0.0;
  double quad_step = 0.0;
  int n_nodes = 0;
  int n_residues = 0;
};

// e^{tB} f0 = sum_{Re lambda_j > -sigma} e^{lambda_j t} P_j f0
//   + (k! / t^k) (1 / 2 pi) int e^{lambda t} (lambda - B)^{-(k+1)} f0 dtau, lambda = -sigma + i tau.
ContourResult propagate_contour(const FourierModeOperator& mode, const CVec& f0, const PropagatorConfig& cfg);

struct DecayFit {
  double rate = 0.0;  // slope of log ||e^{tB} f0|| in t
  double r2 = 0.0;
  std::vector<std::string> warnings;
};
DecayFit mode_decay_fit(const DispersionContext& ctx, double r, const CVec& f0, const std::vector<double>& times);

// Separable data f0(x, v) = g(x) h(v). gaussian: g = exp(-|x|^2 / (2 w^2)).
// critical_lp: g^(y) = |y|^{-alpha} times the Gaussian transform with
// alpha = d (1 - 1/p), capped below d/2 so the data stay in L^2.
enum class Profile { gaussian, critical_lp };

struct WholeSpaceProblem {
  int d_x = 3;
  Profile profile = Profile::gaussian;
  double width = 0.5;
  double m = 0.0;
  double p = 1.0;
  Vec h;  // velocity coefficients; should be rotation invariant
  double y_min = 1e-3;  // first panel edge of the graded radial grid
  double y_max = 0.0;   // 0 picks the point where |g^|^2 < 1e-16 |g^(0)|^2
  int n_per_panel = 8;

  double alpha() const;
  double g_hat(double y) const;
  double g_l2_squared() const;  // exact, gaussian profile only
  double g_lp_squared() const;  // ||g||_{L^p}^2, gaussian profile only
};

struct RadialRule {
  Vec y, w;  // w includes the sphere area and y^{d-1}
};
RadialRule radial_rule(const WholeSpaceProblem& prob);

struct Trajectory {
  std::vector<double> t;
  std::vector<double> norm_l2hm;         // squared
  std::vector<double> norm_weighted_hm;  // squared, ||(a^{1/2})^w .||
  double plancherel_defect = 0.0;        // gaussian profile, m = 0 only
  double tail_estimate = 0.0;
  int n_nodes = 0;
};
Trajectory solve_linear_whole_space(const WholeSpaceProblem& prob, const DispersionContext& ctx,
                                    const std::vector<double>& times);

struct PowerFit {
  double exponent = 0.0;
  double r2 = 0.0;
  double slope_head = 0.0, slope_tail = 0.0;  // local slopes at the window ends
  bool flagged = false;
  std::vector<std::string> warnings;
};
// Power law of the squared norm against 1 + t over t in [t_lo, t_hi].
PowerFit decay_exponent_fit(const Trajectory& traj, double p, double t_lo = 10.0, double t_hi = 100.0);
double predicted_exponent(int d, double p);

struct RegularizingReport {
  std::vector<double> t, lhs, rhs, ratio;
  double sup_ratio = 0.0;
  double sigma_bar = 0.0;
};
RegularizingReport regularizing_check(const WholeSpaceProblem& prob, const DispersionContext& ctx,
                                      const GapScanReport& gap, const std::vector<double>& times, int k);

}  // namespace kspec
