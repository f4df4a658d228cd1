// SPDX-License-Identifier: Apache-2.0
#include "kspec/linalg.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace kspec {

CMat solve_lyapunov(const CMat& B, const CMat& Q) {
  const Eigen::Index n = B.rows();
  Eigen::ComplexSchur<CMat> schur(B);
  const CMat& T = schur.matrixT();
  const CMat& U = schur.matrixU();
  // T^H X + X T = -C with C = U^H Q U; X = U^H G U.
  const CMat C = U.adjoint() * Q * U;
  CMat X = CMat::Zero(n, n);
  const CMat TH = T.adjoint();
  for (Eigen::Index j = 0; j < n; ++j) {
    CVec rhs = -C.col(j);
    if (j > 0) rhs.noalias() -= X.leftCols(j) * T.col(j).head(j);
    // (T^H + T_jj) x = rhs, lower triangular.
    CVec x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      cplx acc = rhs(i);
      for (Eigen::Index k = 0; k < i; ++k) acc -= TH(i, k) * x(k);
      const cplx diag = TH(i, i) + T(j, j);
      if (std::abs(diag) < 1e-300) throw NumericalError("solve_lyapunov: singular Sylvester system");
      x(i) = acc / diag;
    }
    X.col(j) = x;
  }
  return U * X * U.adjoint();
}

double numerical_abscissa(const CMat& B) {
  const CMat H = 0.5 * (B + B.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double eigenvector_condition(const CMat& V) {
  CMat W = V;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    const double n = W.col(j).norm();
    if (n > 0) W.col(j) /= n;
  }
  Eigen::JacobiSVD<CMat> svd(W);
  const Vec sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("spearman: need two equal-length samples");
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

LeastSquares least_squares(const Mat& X, const Vec& y) {
  LeastSquares out;
  out.coef = X.colPivHouseholderQr().solve(y);
  out.residual = y - X * out.coef;
  const double mean = y.mean();
  const double tot = (y.array() - mean).square().sum();
  out.r2 = tot > 0 ? 1.0 - out.residual.squaredNorm() / tot : 1.0;
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  Mat X(x.size(), 2);
  Vec Y(y.size());
  for (size_t i = 0; i < x.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x[i];
    Y(i) = y[i];
  }
  const LeastSquares ls = least_squares(X, Y);
  return {ls.coef(1), ls.coef(0), ls.r2};
}

Mat projector_range(const Mat& P, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (P + P.transpose()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    if (es.eigenvalues()(i) > tol) keep.push_back(i);
  Mat U(P.rows(), keep.size());
  for (size_t k = 0; k < keep.size(); ++k) U.col(k) = es.eigenvectors().col(keep[k]);
  return U;
}

}  // namespace kspec
