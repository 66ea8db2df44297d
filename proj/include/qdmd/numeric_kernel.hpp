#pragma once

#include <complex>

#include <Eigen/Dense>

namespace qdmd {

using DenseMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double kDefaultSvdRelTol = 1e-10;
inline constexpr Eigen::Index kMaxEigDimension = 64;

// Thin SVD: a = u * diag(sigma) * v^T with sigma non-increasing.
struct SvdResult {
  DenseMatrix u;
  Eigen::VectorXd sigma;
  DenseMatrix v;
};

struct EigPairs {
  ComplexVector values;   // sorted by descending modulus
  ComplexMatrix vectors;  // unit-norm columns
};

SvdResult svd(const DenseMatrix& a);

// Minimum-Frobenius-norm X minimising ||b - X a||_F. Singular values of `a`
// below rel_tol * sigma_max are treated as zero.
DenseMatrix pinv_solve(const DenseMatrix& a, const DenseMatrix& b,
                       double rel_tol = kDefaultSvdRelTol);

// All eigenpairs of a small dense real matrix (dimension <= 64). Complex
// eigenvalues come out as exact conjugate pairs, positive imaginary part
// first; ties in modulus are broken by real part, then imaginary part.
EigPairs eig_real(const DenseMatrix& a);

// Minimum-norm least-squares solution of w * x = y.
ComplexVector complex_lstsq(const ComplexMatrix& w, const ComplexVector& y,
                            double rel_tol = kDefaultSvdRelTol);

}  // namespace qdmd
