// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "kspec/types.hpp"

namespace kspec {

// Solves B^H G + G B = -Q by Bartels-Stewart on the complex Schur form of B.
// Requires lambda_i(B) + conj(lambda_j(B)) != 0 for all pairs.
CMat solve_lyapunov(const CMat& B, const CMat& Q);

// Largest eigenvalue of the Hermitian part (B + B^H) / 2.
double numerical_abscissa(const CMat& B);

// Condition number of an eigenvector matrix with unit columns.
double eigenvector_condition(const CMat& V);

double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Least squares y ~ X c with coefficient of determination.
struct LeastSquares {
  Vec coef;
  Vec residual;
  double r2 = 0.0;
};
LeastSquares least_squares(const Mat& X, const Vec& y);

// y ~ intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Orthonormal basis of the range of a symmetric projector.
Mat projector_range(const Mat& P, double tol = 0.5);

}  // namespace kspec
