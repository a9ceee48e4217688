#pragma once

// Dense real linear algebra used by every other module. All matrices are
// small (Choi dimension at most a few hundred) so everything is dense.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "choiforge/error.hpp"

namespace choiforge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Real symmetric matrix. Construction symmetrizes the input, so
/// entries(i, j) == entries(j, i) holds exactly afterwards.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Index dim) : m_(Matrix::Zero(dim, dim)) {}

  explicit SymMatrix(const Matrix& m) {
    require(m.rows() == m.cols(), ErrorKind::DimensionMismatch,
            "symmetric matrix must be square, got " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()));
    require(m.allFinite(), ErrorKind::InvalidInput, "matrix has non-finite entries");
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  /// Sets both (i, j) and (j, i).
  void set(Index i, Index j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  void add(Index i, Index j, double v) {
    m_(i, j) += v;
    if (i != j) m_(j, i) += v;
  }

  SymMatrix operator+(const SymMatrix& o) const { return from_symmetric(m_ + o.m_); }
  SymMatrix operator-(const SymMatrix& o) const { return from_symmetric(m_ - o.m_); }
  SymMatrix operator*(double c) const { return from_symmetric(c * m_); }

  double frobenius_norm() const { return m_.norm(); }
  double trace() const { return m_.trace(); }

  /// Wraps a matrix the caller guarantees is exactly symmetric.
  static SymMatrix from_symmetric(Matrix m) {
    SymMatrix s;
    s.m_ = std::move(m);
    return s;
  }

 private:
  Matrix m_;
};

/// Frobenius inner product Tr(A B) of two symmetric matrices.
inline double trace_inner(const SymMatrix& a, const SymMatrix& b) {
  require(a.dim() == b.dim(), ErrorKind::DimensionMismatch, "trace_inner dimension mismatch");
  return a.matrix().cwiseProduct(b.matrix()).sum();
}

struct EigDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column i pairs with values[i]
};

/// Full symmetric eigendecomposition (Householder tridiagonalization followed
/// by implicit symmetric QR), eigenvalues ascending.
inline EigDecomposition sym_eig(const SymMatrix& a) {
  require(a.matrix().allFinite(), ErrorKind::InvalidInput, "sym_eig: non-finite input");
  if (a.dim() == 0) return {Vector(), Matrix()};
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
  require(es.info() == Eigen::Success, ErrorKind::Factorization, "sym_eig: eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Vector sym_eigenvalues(const SymMatrix& a) {
  require(a.matrix().allFinite(), ErrorKind::InvalidInput, "sym_eigenvalues: non-finite input");
  if (a.dim() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix(), Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorKind::Factorization, "sym_eigenvalues: eigensolver did not converge");
  return es.eigenvalues();
}

inline double min_eigenvalue(const SymMatrix& a) {
  Vector v = sym_eigenvalues(a);
  return v.size() ? v(0) : 0.0;
}

inline constexpr double kDefaultRankTol = 1e-12;

/// G^{-1/2} via eigendecomposition. Throws SingularGram when any eigenvalue is
/// at or below rank_tol times the largest one.
inline SymMatrix inv_sqrt_psd(const SymMatrix& g, double rank_tol = kDefaultRankTol) {
  EigDecomposition e = sym_eig(g);
  const Index n = g.dim();
  if (n == 0) return g;
  const double top = e.values(n - 1);
  const double floor = rank_tol * std::max(top, 0.0);
  if (!(top > 0.0) || e.values(0) <= floor) {
    fail(ErrorKind::SingularGram, "inv_sqrt_psd: eigenvalue " + std::to_string(e.values(0)) +
                                      " below cut " + std::to_string(floor));
  }
  Vector d = e.values.array().rsqrt();
  return SymMatrix(e.vectors * d.asDiagonal() * e.vectors.transpose());
}

/// Thin Householder QR of a tall matrix, with the sign convention that the
/// diagonal of R is non-negative.
inline std::pair<Matrix, Matrix> qr(const Matrix& a) {
  require(a.rows() >= a.cols(), ErrorKind::InvalidInput, "qr: needs rows >= cols");
  require(a.allFinite(), ErrorKind::InvalidInput, "qr: non-finite input");
  Eigen::HouseholderQR<Matrix> h(a);
  Matrix q = h.householderQ() * Matrix::Identity(a.rows(), a.cols());
  Matrix r = h.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Index i = 0; i < r.rows(); ++i) {
    if (r(i, i) < 0) {
      r.row(i) *= -1.0;
      q.col(i) *= -1.0;
    }
  }
  return {q, r};
}

/// Lower-triangular L with L L^T = a for positive semidefinite a. Zero pivots
/// (within tolerance) produce zero columns instead of failing.
inline Matrix cholesky_psd(const SymMatrix& a, double tol = 1e-12) {
  const Index n = a.dim();
  const Matrix& m = a.matrix();
  require(m.allFinite(), ErrorKind::InvalidInput, "cholesky_psd: non-finite input");
  const double scale = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  const double cut = tol * scale;
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (d < -1e-9 * scale) {
      fail(ErrorKind::NotPsd, "cholesky_psd: negative pivot " + std::to_string(d));
    }
    if (d <= cut) {
      // Zero pivot: the rest of the column must vanish too.
      for (Index i = j + 1; i < n; ++i) {
        double r = m(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
        if (std::abs(r) > 1e-6 * scale) {
          fail(ErrorKind::NotPsd, "cholesky_psd: indefinite at column " + std::to_string(j));
        }
      }
      continue;
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

/// Solves a x = b for symmetric positive definite a.
inline Matrix solve_spd(const SymMatrix& a, const Matrix& b) {
  require(a.dim() == b.rows(), ErrorKind::DimensionMismatch, "solve_spd: dimension mismatch");
  require(a.matrix().allFinite() && b.allFinite(), ErrorKind::InvalidInput, "solve_spd: non-finite input");
  Eigen::LLT<Matrix> llt(a.matrix());
  if (llt.info() != Eigen::Success) fail(ErrorKind::Factorization, "solve_spd: matrix is not positive definite");
  const Matrix& lm = llt.matrixLLT();
  for (Index i = 0; i < lm.rows(); ++i) {
    if (!(lm(i, i) > 0.0)) fail(ErrorKind::Factorization, "solve_spd: zero pivot");
  }
  return llt.solve(b);
}

/// Orthonormal basis of the orthogonal complement of span(columns of c),
/// as columns of a dim x (dim - rank) matrix. Columns of c whose residual
/// after projection falls below tol are treated as dependent.
inline Matrix complement_basis(const Matrix& c, Index dim, double tol = 1e-10) {
  if (c.cols() == 0) return Matrix::Identity(dim, dim);
  Eigen::ColPivHouseholderQR<Matrix> h(c);
  h.setThreshold(tol);
  const Index rank = h.rank();
  Matrix q = h.householderQ();
  return q.rightCols(dim - rank);
}

}  // namespace choiforge
