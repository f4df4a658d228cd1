#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "kspec/velocity_basis.hpp"

using namespace kspec;

namespace {

// He_n(x) / sqrt(n!) from the textbook recursion, independent of the library tables.
double he(int n, double x) {
  double a = 1.0, b = x, fact = 1.0;
  if (n == 0) return 1.0;
  for (int k = 1; k < n; ++k) {
    const double c = x * b - k * a;
    a = b;
    b = c;
  }
  for (int k = 2; k <= n; ++k) fact *= k;
  return b / std::sqrt(fact);
}

double hpoly(const HermiteBasis& b, int k, const double* v) {
  double p = 1.0;
  for (int i = 0; i < b.dim_v; ++i) p *= he(b.index_set(k, i), v[i]);
  return p;
}

// int f g dv for f = P mu^{1/2}, g = Q mu^{1/2} reduces to int P Q mu dv.
template <class F>
double mu_integral(const HermiteBasis& b, F&& fn) {
  double s = 0.0;
  const double norm = std::pow(2.0 * pi, -0.5 * b.dim_v);
  for (Eigen::Index q = 0; q < b.quad_nodes.cols(); ++q) s += b.quad_weights(q) * norm * fn(b.quad_nodes.col(q).data());
  return s;
}

Mat random_rotation(int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Mat G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = nd(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  if (Q.determinant() < 0) Q.col(0) *= -1.0;
  return Q;
}

}  // namespace

TEST_CASE("basis sizes follow the multi-index count") {
  CHECK(build_basis(1, 2, 3).size() == 3);
  CHECK(build_basis(3, 2, 3).size() == 10);
  CHECK(build_basis(3, 6, 7).size() == 84);
  CHECK(build_basis(2, 4, 5).size() == 15);
}

TEST_CASE("basis construction rejects bad parameters") {
  CHECK_THROWS_AS(build_basis(3, 1, 3), ConfigError);
  CHECK_THROWS_AS(build_basis(3, 4, 4), ConfigError);
  CHECK_THROWS_AS(build_basis(0, 4, 5), ConfigError);
}

TEST_CASE("index ordering is graded and deterministic") {
  const HermiteBasis a = build_basis(3, 5, 6), b = build_basis(3, 5, 6);
  CHECK(a.index_set == b.index_set);
  for (int k = 1; k < a.size(); ++k) CHECK(a.degree(k) >= a.degree(k - 1));
  CHECK(a.degree(0) == 0);
  CHECK(a.index_of({0, 0, 0}) == 0);
  CHECK(a.index_of({0, 0, 6}) == -1);
}

TEST_CASE("quadrature integrates Gaussian moments") {
  const HermiteBasis b = build_basis(3, 4, 5);
  CHECK(mu_integral(b, [](const double*) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(mu_integral(b, [](const double* v) { return v[0] * v[0]; }) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(mu_integral(b, [](const double* v) { return std::pow(v[1], 4); }) == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("Gram matrix of the basis is the identity") {
  for (int d : {1, 2, 3}) {
    const HermiteBasis b = build_basis(d, 6, 7);
    const int n = b.size();
    Mat G = Mat::Zero(n, n);
    Vec p(n);
    const double norm = std::pow(2.0 * pi, -0.5 * d);
    for (Eigen::Index q = 0; q < b.quad_nodes.cols(); ++q) {
      b.eval_poly(b.quad_nodes.col(q).data(), p.data());
      G += b.quad_weights(q) * norm * p * p.transpose();
    }
    CHECK((G - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("basis polynomials agree with the textbook recursion") {
  const HermiteBasis b = build_basis(3, 6, 7);
  const double v[3] = {0.3, -1.2, 2.1};
  const Vec p = b.eval_poly(Vec(Eigen::Map<const Vec>(v, 3)));
  for (int k = 0; k < b.size(); ++k) CHECK(p(k) == doctest::Approx(hpoly(b, k, v)).epsilon(1e-13));
}

TEST_CASE("kernel vectors") {
  for (int d : {1, 2, 3}) {
    const HermiteBasis b = build_basis(d, 4, 5);
    const Mat Psi = kernel_vectors(b).columns;
    REQUIRE(Psi.cols() == d + 2);
    CHECK((Psi.transpose() * Psi - Mat::Identity(d + 2, d + 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Psi.col(0) - Vec::Unit(b.size(), 0)).norm() < 1e-15);
    for (int k = 0; k < b.size(); ++k)
      if (b.degree(k) > 2) CHECK(Psi.row(k).cwiseAbs().maxCoeff() == 0.0);
    // psi_i = v_i mu^{1/2} is the first-degree Hermite function.
    for (int i = 0; i < d; ++i) {
      std::vector<int> e(d, 0);
      e[i] = 1;
      CHECK(Psi(b.index_of(e), i + 1) == doctest::Approx(1.0));
    }
    // psi_{d+1} = (|v|^2 - d) / sqrt(2d) mu^{1/2}: closed form 1/sqrt(d) on each 2 e_i and
    // the quadrature projection as an independent oracle.
    for (int k = 0; k < b.size(); ++k) {
      double closed = 0.0;
      for (int i = 0; i < d; ++i) {
        std::vector<int> e(d, 0);
        e[i] = 2;
        if (b.index_of(e) == k) closed = 1.0 / std::sqrt(double(d));
      }
      const double quad = mu_integral(b, [&](const double* v) {
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) r2 += v[i] * v[i];
        return (r2 - d) / std::sqrt(2.0 * d) * hpoly(b, k, v);
      });
      CHECK(Psi(k, d + 1) == doctest::Approx(closed).epsilon(1e-12));
      CHECK(std::abs(Psi(k, d + 1) - quad) < 1e-12);
    }
  }
}

TEST_CASE("projector identities") {
  const HermiteBasis b = build_basis(3, 5, 6);
  const Projectors P = projection_P0(b);
  const int n = b.size();
  CHECK((P.P0 * P.P0 - P.P0).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((P.P0 * P.P1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((P.P0 + P.P1 - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(P.P0.trace() == doctest::Approx(5.0).epsilon(1e-12));
  const Vec psi1 = kernel_vectors(b).columns.col(1);
  CHECK((P.P0 * psi1 - psi1).norm() < 1e-12);
}

TEST_CASE("multiplication by v1") {
  const HermiteBasis b = build_basis(3, 5, 6);
  const Mat V1 = multiply_by_v1(b);
  CHECK((V1 - V1.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  const int e1 = b.index_of({1, 0, 0});
  CHECK(V1(0, e1) == doctest::Approx(1.0).epsilon(1e-14));
  // Bandwidth: only neighbouring degrees couple.
  for (int a = 0; a < b.size(); ++a)
    for (int c = 0; c < b.size(); ++c)
      if (std::abs(b.degree(a) - b.degree(c)) != 1) CHECK(V1(a, c) == 0.0);
  // Quadrature oracle for (v1 phi_a, phi_c).
  const HermiteBasis bq = build_basis(3, 5, 8);
  double worst = 0.0;
  for (int a = 0; a < b.size(); ++a)
    for (int c = a; c < b.size(); ++c) {
      const double q = mu_integral(bq, [&](const double* v) { return v[0] * hpoly(b, a, v) * hpoly(b, c, v); });
      worst = std::max(worst, std::abs(q - V1(a, c)));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("weight matrix") {
  const HermiteBasis b = build_basis(3, 4, 5);
  const int n = b.size();
  CHECK((weight_matrix(b, 0.0) - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
  const Mat W2 = weight_matrix(b, 2.0);
  CHECK(W2(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  // <v>^2 is a polynomial, so a quadrature of sufficient order is exact.
  const HermiteBasis bq = build_basis(3, 4, 8);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      const double q = mu_integral(bq, [&](const double* v) {
        return (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * hpoly(b, a, v) * hpoly(b, c, v);
      });
      CHECK(std::abs(q - W2(a, c)) < 1e-11);
    }
  Diagnostics diag;
  const Mat W = weight_matrix(b, 1.5, &diag);
  CHECK((W - W.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(W);
  CHECK(es.eigenvalues()(0) > 0.0);
}

TEST_CASE("reduced stream matrix") {
  for (int d : {1, 2, 3}) {
    const HermiteBasis b = build_basis(d, 3, 4);
    const Mat S = reduced_stream_matrix(b);
    const Mat Psi = kernel_vectors(b).columns;
    CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((S - Psi.transpose() * multiply_by_v1(b) * Psi).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(S(1, d + 1) == doctest::Approx(std::sqrt(2.0 / d)).epsilon(1e-12));
    CHECK(S(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    const double c = std::sqrt((d + 2.0) / d);
    CHECK(es.eigenvalues()(0) == doctest::Approx(-c).epsilon(1e-12));
    CHECK(es.eigenvalues()(d + 1) == doctest::Approx(c).epsilon(1e-12));
    for (int k = 1; k <= d; ++k) CHECK(std::abs(es.eigenvalues()(k)) < 1e-12);
  }
  const HermiteBasis b = build_basis(3, 2, 3);
  Eigen::SelfAdjointEigenSolver<Mat> es(reduced_stream_matrix(b));
  const Vec plus = (Vec(5) << std::sqrt(0.3), 1 / std::sqrt(2.0), 0, 0, std::sqrt(0.2)).finished();
  const Vec got = es.eigenvectors().col(4);
  CHECK(std::min((got - plus).norm(), (got + plus).norm()) < 1e-12);
}

TEST_CASE("rotation representation") {
  const HermiteBasis b = build_basis(3, 4, 5);
  const int n = b.size();
  CHECK((rotation_representation(b, Mat::Identity(3, 3)) - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);

  Mat swap = Mat::Zero(3, 3);
  swap(0, 1) = swap(1, 0) = swap(2, 2) = 1.0;
  const Mat Psi = kernel_vectors(b).columns;
  CHECK((rotation_representation(b, swap) * Psi.col(1) - Psi.col(2)).norm() < 1e-12);

  const Mat R = random_rotation(3, 11);
  const Mat Rep = rotation_representation(b, R);
  CHECK((Rep.transpose() * Rep - Mat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
  const Mat P0 = projection_P0(b).P0;
  CHECK((Rep * P0 - P0 * Rep).cwiseAbs().maxCoeff() < 1e-10);

  // Change of variables: (f o R, phi_c) = int H_a(R v) H_c(v) mu dv.
  const HermiteBasis bq = build_basis(3, 4, 6);
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      const double q = mu_integral(bq, [&](const double* v) {
        const Vec Rv = R * Eigen::Map<const Vec>(v, 3);
        return hpoly(b, a, Rv.data()) * hpoly(b, c, v);
      });
      worst = std::max(worst, std::abs(q - Rep(c, a)));
    }
  CHECK(worst < 1e-10);

  Mat bad = Mat::Identity(3, 3);
  bad(0, 1) = 0.1;
  CHECK_THROWS_AS(rotation_representation(b, bad), ConfigError);
}
