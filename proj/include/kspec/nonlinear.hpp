// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "kspec/collision.hpp"
#include "kspec/dispersion.hpp"
#include "kspec/semigroup.hpp"

namespace kspec {

struct XNormConfig {
  double delta = 0.0;  // 0 picks 1 / (4 lambda_max(K))
  double m = 2.0;
  double lyapunov_tol = 1e-12;
  void validate(int d) const;
};

// Fourier modes y_k e1 with quadrature weights w_k (1 for a discrete mode set).
struct ModeSet {
  std::string kind;
  Vec y, w;
};
// {-y, 0, y}
ModeSet single_mode_triple(double spacing = 0.5);
// k * spacing for k = -K..K, K <= 8
ModeSet periodic_box_1d_x(double spacing, int K);
// Radial rule of a whole-space problem; all nodes positive.
ModeSet radial_modes(const WholeSpaceProblem& prob);

// B(y) = -2 pi i y V1 + L for signed y.
CMat mode_matrix(const DispersionContext& ctx, double y);

// X-norm squared,
//   sum_k w_k <y_k>^{2m} [delta ||f_k||^2 + f_k^H G_k f_k],
// where G_k solves B_k^H G_k + G_k B_k = -I, so f^H G_k f = int_0^inf ||e^{tau B_k} f||^2.
// At y = 0 the integral is taken over range(P1), where L is invertible.
class XNorm {
 public:
  XNorm(const DispersionContext& ctx, const ModeSet& modes, const XNormConfig& cfg);

  double value(const CMat& F) const;           // columns are modes
  double instant(const CMat& F) const;         // delta sum w <y>^{2m} ||f_k||^2
  double l2hm(const CMat& F) const;            // sum w <y>^{2m} ||f_k||^2
  double weighted(const CMat& F) const;        // sum w <y>^{2m} ||f_k||_a^2
  double mode_integral(int k, const CVec& f) const { return std::real(f.dot(G_[k] * f)); }

  const DispersionContext& ctx() const { return *ctx_; }
  const ModeSet& modes() const { return modes_; }
  double delta() const { return delta_; }
  double m() const { return cfg_.m; }
  double lyapunov_residual() const { return lyap_residual_; }

 private:
  const DispersionContext* ctx_;
  ModeSet modes_;
  XNormConfig cfg_;
  double delta_ = 0.0;
  std::vector<CMat> G_;
  Vec sob_;  // <y_k>^{2m} w_k
  double lyap_residual_ = 0.0;
};

struct EnergyRun {
  std::vector<double> t;
  std::vector<CMat> states;
  std::vector<double> G;            // delta-energy plus 2 delta nu0 int ||f||_a^2
  std::vector<double> norm_l2hm;
  std::vector<double> norm_weighted;
  std::vector<double> step_gamma_constant;
  double eps0_sq = 0.0;
  double certificate = 0.0;  // max_t G / (2 eps0^2)
  bool blew_up = false;
  std::vector<std::string> warnings;
};

// Gamma(g, f) for mode-indexed states: (Gamma g f)_k = sum_{a + b = k} Gamma(g_a, f_b).
CMat convolve_gamma(const GammaTensor& gam, const ModeSet& modes, const CMat& g, const CMat& f);

// f_t = B f + Gamma(g, f): f_{j+1} = e^{dt B}(f_j + dt Gamma(g_j, f_j)).
// g is given at the same step times; nullptr means g = 0.
EnergyRun linear_energy_run(const XNorm& xn, const GammaTensor& gam, const std::vector<CMat>* g, const CMat& F0,
                            double dt, double T);

struct PicardResult {
  double eps0 = 0.0;
  std::vector<double> G_diff;  // sup_t G(f^{n+1} - f^n)
  std::vector<double> ratios;  // G_diff[n] / G_diff[n-1]
  bool contracted = false;     // every ratio <= 1/2 and no blow-up
  bool converged = false;      // G_diff fell below lyapunov_tol * G_diff[0]
  double C_double_prime = 0.0;
  EnergyRun solution;
};
PicardResult picard_solve(const XNorm& xn, const GammaTensor& gam, const CMat& F0, double dt, double T, int n_iter,
                          double tol = 1e-24);

struct ThresholdResult {
  double eps_star = 0.0;
  double eps_fail = 0.0;  // smallest failing scale seen
  int iterations = 0;
  PicardResult below;     // run at eps_star / 2
  PicardResult above;     // run at 2 eps_star
};
// Bisection in log(eps) between contraction success and failure for data
// eps * profile / ||profile||_X.
ThresholdResult epsilon_threshold(const XNorm& xn, const GammaTensor& gam, const CMat& profile, double dt, double T,
                                  int n_iter = 7, double rel_tol = 0.02);

// Seeded real-in-x data on a symmetric mode set (f_{-k} = conj f_k).
CMat default_nonlinear_profile(const ModeSet& modes, int nb, unsigned long long seed);

}  // namespace kspec
