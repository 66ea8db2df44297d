#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdmd/errors.hpp"
#include "qdmd/numeric_kernel.hpp"

using namespace qdmd;

namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  }
  return m;
}

// Gaussian elimination with partial pivoting, written out by hand.
DenseMatrix solve_gauss(DenseMatrix a, DenseMatrix b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    }
    a.row(k).swap(a.row(p));
    b.row(k).swap(b.row(p));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (Eigen::Index j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
    }
  }
  DenseMatrix x(n, b.cols());
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = b(i, j);
      for (Eigen::Index k = i + 1; k < n; ++k) s -= a(i, k) * x(k, j);
      x(i, j) = s / a(i, i);
    }
  }
  return x;
}

}  // namespace

TEST_CASE("svd of identity and rank one") {
  const auto s = svd(DenseMatrix::Identity(3, 3));
  for (int i = 0; i < 3; ++i) CHECK(s.sigma(i) == doctest::Approx(1.0).epsilon(1e-15));

  Eigen::VectorXd u(4), v(3);
  u << 1, 2, -1, 0.5;
  v << 3, 0, 4;
  const auto r1 = svd(u * v.transpose());
  CHECK(std::abs(r1.sigma(0) - u.norm() * v.norm()) <= 1e-12);
  for (Eigen::Index i = 1; i < r1.sigma.size(); ++i) CHECK(r1.sigma(i) <= 1e-12);
}

TEST_CASE("svd reconstructs random matrices and has orthonormal factors") {
  std::mt19937_64 rng(3);
  for (auto [r, c] : {std::pair<int, int>{6, 4}, {4, 6}, {64, 64}, {30, 7}, {1, 5}}) {
    const auto a = random_matrix(rng, r, c);
    const auto s = svd(a);
    const DenseMatrix back = s.u * s.sigma.asDiagonal() * s.v.transpose();
    CHECK((back - a).norm() / a.norm() < 1e-10);
    const auto k = s.sigma.size();
    CHECK((s.u.transpose() * s.u - DenseMatrix::Identity(k, k)).norm() < 1e-10);
    CHECK((s.v.transpose() * s.v - DenseMatrix::Identity(k, k)).norm() < 1e-10);
    for (Eigen::Index i = 1; i < k; ++i) CHECK(s.sigma(i) <= s.sigma(i - 1));
  }
}

TEST_CASE("svd rejects non-finite input") {
  DenseMatrix a = DenseMatrix::Ones(2, 2);
  a(0, 1) = NAN;
  CHECK_THROWS_AS(svd(a), ValidationError);
}

TEST_CASE("pinv_solve on invertible, zero and overdetermined systems") {
  std::mt19937_64 rng(8);
  const auto a = random_matrix(rng, 5, 5);
  const auto b = random_matrix(rng, 3, 5);
  // X a = b  <=>  a^T X^T = b^T
  const DenseMatrix expect = solve_gauss(a.transpose(), b.transpose()).transpose();
  CHECK((pinv_solve(a, b) - expect).norm() < 1e-10 * (1.0 + expect.norm()));

  const DenseMatrix zero = pinv_solve(DenseMatrix::Zero(4, 6), random_matrix(rng, 2, 6));
  CHECK(zero.rows() == 2);
  CHECK(zero.cols() == 4);
  CHECK(zero.norm() == 0.0);

  // Overdetermined: X (2x4) from a (4 x 30); normal equations X (a a^T) = b a^T.
  for (int trial = 0; trial < 20; ++trial) {
    const auto ao = random_matrix(rng, 4, 30);
    const auto bo = random_matrix(rng, 2, 30);
    const DenseMatrix gram = ao * ao.transpose();
    const DenseMatrix rhs = bo * ao.transpose();
    const DenseMatrix normal = solve_gauss(gram.transpose(), rhs.transpose()).transpose();
    CHECK((pinv_solve(ao, bo) - normal).norm() < 1e-8);
  }
}

TEST_CASE("pinv_solve returns the minimum-norm solution and is idempotent") {
  std::mt19937_64 rng(12);
  // Rank-deficient a: the third row duplicates the first.
  DenseMatrix a = random_matrix(rng, 3, 10);
  a.row(2) = a.row(0);
  const DenseMatrix b = random_matrix(rng, 2, 10);
  const DenseMatrix x = pinv_solve(a, b);
  // Adding any null-space direction of a^T to X cannot lower the norm.
  Eigen::RowVector3d null_dir(1.0, 0.0, -1.0);
  const DenseMatrix bumped = x + DenseMatrix::Ones(2, 1) * null_dir * 1e-3;
  CHECK(((bumped * a) - (x * a)).norm() < 1e-10);
  CHECK(bumped.norm() > x.norm());
  // Re-solving for the residual gives no further correction.
  const DenseMatrix resid = b - x * a;
  CHECK(pinv_solve(a, resid).norm() < 1e-10);
}

TEST_CASE("eig_real on diagonal, rotation and random matrices") {
  DenseMatrix d(2, 2);
  d << 0.9, 0, 0, 0.5;
  const auto ed = eig_real(d);
  CHECK(ed.values(0) == std::complex<double>(0.9, 0.0));
  CHECK(ed.values(1) == std::complex<double>(0.5, 0.0));

  const double th = 0.7;
  DenseMatrix rot(2, 2);
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const auto er = eig_real(rot);
  CHECK(std::abs(er.values(0) - std::polar(1.0, th)) < 1e-10);
  CHECK(std::abs(er.values(1) - std::polar(1.0, -th)) < 1e-10);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_matrix(rng, 8, 8);
    const auto e = eig_real(a);
    std::complex<double> sum = 0.0, prod = 1.0;
    for (Eigen::Index i = 0; i < 8; ++i) {
      sum += e.values(i);
      prod *= e.values(i);
    }
    CHECK(std::abs(sum - a.trace()) < 1e-8);
    CHECK(std::abs(prod - a.determinant()) < 1e-8 * (1.0 + std::abs(a.determinant())));
    const ComplexMatrix ac = a.cast<std::complex<double>>();
    for (Eigen::Index i = 0; i < 8; ++i) {
      const auto w = e.vectors.col(i);
      CHECK((ac * w - e.values(i) * w).norm() <= 1e-8 * a.norm() * w.norm());
      if (i > 0) CHECK(std::abs(e.values(i)) <= std::abs(e.values(i - 1)) + 1e-15);
    }
    // Conjugate partners are bitwise mirror images and adjacent.
    for (Eigen::Index i = 0; i < 8; ++i) {
      if (e.values(i).imag() > 0.0) {
        REQUIRE(i + 1 < 8);
        CHECK(e.values(i + 1) == std::conj(e.values(i)));
      }
    }
  }
}

TEST_CASE("eig_real agrees with the 2x2 trace/determinant formula") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_matrix(rng, 2, 2);
    const auto [l1, l2] = oracle::eig2(a(0, 0), a(0, 1), a(1, 0), a(1, 1));
    const auto e = eig_real(a);
    const double direct = std::abs(e.values(0) - l1) + std::abs(e.values(1) - l2);
    const double crossed = std::abs(e.values(0) - l2) + std::abs(e.values(1) - l1);
    CHECK(std::min(direct, crossed) < 1e-9);
  }
}

TEST_CASE("eig_real enforces its dimension cap") {
  CHECK_NOTHROW(eig_real(DenseMatrix::Identity(64, 64)));
  CHECK_THROWS_AS(eig_real(DenseMatrix::Identity(65, 65)), ValidationError);
  CHECK_THROWS_AS(eig_real(DenseMatrix::Ones(2, 3)), ValidationError);
}

TEST_CASE("complex_lstsq on unitary, duplicated and real systems") {
  std::mt19937_64 rng(6);
  const Eigen::HouseholderQR<DenseMatrix> qr(random_matrix(rng, 4, 4));
  const DenseMatrix q = qr.householderQ();
  const ComplexMatrix w = q.cast<std::complex<double>>();
  ComplexVector y(4);
  y << std::complex<double>(1, 2), 0.5, std::complex<double>(-1, 0.25), 3;
  CHECK((complex_lstsq(w, y) - w.adjoint() * y).norm() < 1e-12);

  ComplexMatrix dup(3, 2);
  dup << 1, 1, 2, 2, -1, -1;
  ComplexVector yd(3);
  yd << 2, 4, -2;
  const auto b = complex_lstsq(dup, yd);
  CHECK(std::abs(b(0) - 1.0) < 1e-12);
  CHECK(std::abs(b(1) - 1.0) < 1e-12);
  // Any other exact solution (1 + e, 1 - e) has a larger norm.
  for (double e : {1e-3, -1e-3, 0.5}) {
    ComplexVector other(2);
    other << 1.0 + e, 1.0 - e;
    CHECK((dup * other - yd).norm() < 1e-12);
    CHECK(other.norm() > b.norm());
  }

  const auto wr = random_matrix(rng, 6, 3);
  const auto yr = random_matrix(rng, 6, 1);
  const auto br = complex_lstsq(wr.cast<std::complex<double>>(),
                                yr.col(0).cast<std::complex<double>>());
  CHECK(br.imag().norm() < 1e-12);
}
