#include "qdmd/numeric_kernel.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

#include "qdmd/errors.hpp"

namespace qdmd {

namespace {

void require_finite(const DenseMatrix& a, const char* what) {
  if (!a.allFinite()) {
    throw ValidationError(std::string(what) + ": matrix has non-finite entries");
  }
}

}  // namespace

SvdResult svd(const DenseMatrix& a) {
  require_finite(a, "svd");
  SvdResult out;
  if (a.size() == 0) {
    out.u = DenseMatrix(a.rows(), 0);
    out.v = DenseMatrix(a.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<DenseMatrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.u = solver.matrixU();
  out.sigma = solver.singularValues();
  out.v = solver.matrixV();
  return out;
}

DenseMatrix pinv_solve(const DenseMatrix& a, const DenseMatrix& b, double rel_tol) {
  if (a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << "pinv_solve: shape mismatch, a is " << a.rows() << "x" << a.cols()
        << " and b is " << b.rows() << "x" << b.cols();
    throw ValidationError(msg.str());
  }
  require_finite(b, "pinv_solve");
  const SvdResult s = svd(a);
  DenseMatrix x = DenseMatrix::Zero(b.rows(), a.rows());
  if (s.sigma.size() == 0 || s.sigma(0) <= 0.0) return x;
  const double cutoff = rel_tol * s.sigma(0);
  Eigen::Index rank = 0;
  while (rank < s.sigma.size() && s.sigma(rank) > cutoff) ++rank;
  // x = b V_r diag(1/sigma_r) U_r^T
  DenseMatrix bv = b * s.v.leftCols(rank);
  for (Eigen::Index j = 0; j < rank; ++j) bv.col(j) /= s.sigma(j);
  x.noalias() = bv * s.u.leftCols(rank).transpose();
  return x;
}

EigPairs eig_real(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("eig_real: matrix is not square");
  if (a.rows() > kMaxEigDimension) {
    throw ValidationError("eig_real: dimension " + std::to_string(a.rows()) +
                          " exceeds the mode cap of 64");
  }
  require_finite(a, "eig_real");
  const Eigen::Index n = a.rows();
  EigPairs out;
  if (n == 0) return out;

  Eigen::EigenSolver<DenseMatrix> solver(a, true);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eig_real: QR iteration did not converge (n=" << n
        << ", norm=" << a.norm() << ", max |entry|=" << a.cwiseAbs().maxCoeff() << ")";
    throw NumericError(msg.str());
  }
  ComplexVector values = solver.eigenvalues();
  ComplexMatrix vectors = solver.eigenvectors();

  // Canonical pair representatives: keep the member with positive imaginary
  // part and rebuild its partner as the exact conjugate.
  std::vector<Eigen::Index> reps;
  std::vector<bool> is_pair;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (values(i).imag() == 0.0) {
      reps.push_back(i);
      is_pair.push_back(false);
    } else if (values(i).imag() > 0.0) {
      reps.push_back(i);
      is_pair.push_back(true);
    }
  }
  std::vector<std::size_t> order(reps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto& lx = values(reps[x]);
    const auto& ly = values(reps[y]);
    const double mx = std::abs(lx), my = std::abs(ly);
    if (mx != my) return mx > my;
    if (lx.real() != ly.real()) return lx.real() > ly.real();
    return lx.imag() > ly.imag();
  });

  out.values.resize(n);
  out.vectors.resize(n, n);
  Eigen::Index col = 0;
  for (std::size_t o : order) {
    const Eigen::Index i = reps[o];
    Eigen::VectorXcd v = vectors.col(i);
    const double nv = v.norm();
    if (nv > 0.0) v /= nv;
    if (!is_pair[o]) {
      out.values(col) = std::complex<double>(values(i).real(), 0.0);
      out.vectors.col(col) = v;
      ++col;
    } else {
      out.values(col) = values(i);
      out.vectors.col(col) = v;
      out.values(col + 1) = std::conj(values(i));
      out.vectors.col(col + 1) = v.conjugate();
      col += 2;
    }
  }
  if (col != n) {
    throw NumericError("eig_real: unpaired complex eigenvalue in a real spectrum");
  }
  return out;
}

ComplexVector complex_lstsq(const ComplexMatrix& w, const ComplexVector& y, double rel_tol) {
  if (w.size() == 0) throw ValidationError("complex_lstsq: empty coefficient matrix");
  if (w.rows() != y.size()) throw ValidationError("complex_lstsq: shape mismatch");
  if (!w.allFinite() || !y.allFinite()) {
    throw ValidationError("complex_lstsq: non-finite input");
  }
  Eigen::BDCSVD<ComplexMatrix> solver(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = solver.singularValues();
  ComplexVector x = ComplexVector::Zero(w.cols());
  if (sigma.size() == 0 || sigma(0) <= 0.0) return x;
  const double cutoff = rel_tol * sigma(0);
  ComplexVector uty = solver.matrixU().adjoint() * y;
  for (Eigen::Index j = 0; j < sigma.size(); ++j) {
    uty(j) = sigma(j) > cutoff ? uty(j) / sigma(j) : std::complex<double>(0.0, 0.0);
  }
  x.noalias() = solver.matrixV() * uty;
  return x;
}

}  // namespace qdmd
