#pragma once

// Channel representations. Throughout the library a Choi matrix or fidelity
// tensor over output index j (dimension D) and input index k (dimension n)
// uses the scalar multi-index i = j * n + k.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "choiforge/error.hpp"
#include "choiforge/linalg.hpp"

namespace choiforge {

enum class ConstraintKind { TracePreserving, UnitPreserving };

inline const char* to_string(ConstraintKind kind) {
  return kind == ConstraintKind::TracePreserving ? "tp" : "unit";
}

inline Index multi_index(Index j, Index k, Index d_in) { return j * d_in + k; }

class PureState {
 public:
  PureState() = default;

  /// Takes an already unit-norm vector.
  explicit PureState(Vector amplitudes) : amp_(std::move(amplitudes)) {
    require(amp_.size() > 0 && amp_.allFinite(), ErrorKind::InvalidInput, "pure state must be finite and nonempty");
    require(std::abs(amp_.norm() - 1.0) <= 1e-12, ErrorKind::InvalidInput,
            "pure state is not unit norm (norm " + std::to_string(amp_.norm()) + ")");
  }

  static PureState normalized(const Vector& v) {
    const double nrm = v.norm();
    require(nrm > 0.0 && std::isfinite(nrm), ErrorKind::InvalidInput, "cannot normalize a zero vector");
    return PureState(v / nrm);
  }

  Index dim() const { return amp_.size(); }
  const Vector& amplitudes() const { return amp_; }
  double operator()(Index i) const { return amp_(i); }

  PureState negated() const { return PureState(Vector(-amp_)); }

 private:
  Vector amp_;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;

  /// check_trace = false is for outputs of trace-decreasing (unit-preserving)
  /// maps, where only positivity is meaningful.
  explicit DensityMatrix(SymMatrix m, bool check_trace = true) : m_(std::move(m)), trace_checked_(check_trace) {
    require(m_.dim() > 0, ErrorKind::InvalidInput, "density matrix must be nonempty");
    const double scale = std::max(1.0, std::abs(m_.trace()));
    require(min_eigenvalue(m_) >= -1e-10 * scale, ErrorKind::NotPsd, "density matrix is not positive semidefinite");
    if (check_trace) {
      require(std::abs(m_.trace() - 1.0) <= 1e-10, ErrorKind::InvalidInput,
              "density matrix trace " + std::to_string(m_.trace()) + " is not 1");
    }
  }

  static DensityMatrix from_pure(const PureState& psi) {
    const Vector& v = psi.amplitudes();
    return DensityMatrix(SymMatrix::from_symmetric(v * v.transpose()));
  }

  Index dim() const { return m_.dim(); }
  const SymMatrix& matrix() const { return m_; }
  double trace() const { return m_.trace(); }
  bool trace_checked() const { return trace_checked_; }

 private:
  SymMatrix m_;
  bool trace_checked_ = true;
};

/// Ordered set of D x n Kraus operators B_s.
class KrausSet {
 public:
  KrausSet() = default;

  KrausSet(Index d_out, Index d_in, std::vector<Matrix> ops) : d_out_(d_out), d_in_(d_in), ops_(std::move(ops)) {
    require(d_out_ >= 1 && d_in_ >= 1, ErrorKind::InvalidInput, "Kraus set dimensions must be positive");
    require(!ops_.empty(), ErrorKind::InvalidInput, "Kraus set needs at least one operator");
    for (const Matrix& b : ops_) {
      require(b.rows() == d_out_ && b.cols() == d_in_, ErrorKind::DimensionMismatch,
              "Kraus operator is " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ", expected " +
                  std::to_string(d_out_) + "x" + std::to_string(d_in_));
      require(b.allFinite(), ErrorKind::InvalidInput, "Kraus operator has non-finite entries");
    }
  }

  static KrausSet single(const Matrix& b) { return KrausSet(b.rows(), b.cols(), {b}); }

  Index d_out() const { return d_out_; }
  Index d_in() const { return d_in_; }
  Index n_s() const { return static_cast<Index>(ops_.size()); }
  const std::vector<Matrix>& operators() const { return ops_; }
  const Matrix& op(Index s) const { return ops_[static_cast<std::size_t>(s)]; }

  KrausSet scaled(double c) const {
    std::vector<Matrix> out;
    out.reserve(ops_.size());
    for (const Matrix& b : ops_) out.push_back(c * b);
    return KrausSet(d_out_, d_in_, std::move(out));
  }

  /// Dn x N_s matrix whose column s is B_s flattened with i = j * n + k.
  Matrix stacked() const {
    Matrix m(d_out_ * d_in_, n_s());
    for (Index s = 0; s < n_s(); ++s) {
      for (Index j = 0; j < d_out_; ++j)
        for (Index k = 0; k < d_in_; ++k) m(multi_index(j, k, d_in_), s) = op(s)(j, k);
    }
    return m;
  }

  static KrausSet from_stacked(Index d_out, Index d_in, const Matrix& cols) {
    require(cols.rows() == d_out * d_in, ErrorKind::DimensionMismatch, "stacked Kraus matrix has wrong row count");
    std::vector<Matrix> ops;
    for (Index s = 0; s < cols.cols(); ++s) {
      Matrix b(d_out, d_in);
      for (Index j = 0; j < d_out; ++j)
        for (Index k = 0; k < d_in; ++k) b(j, k) = cols(multi_index(j, k, d_in), s);
      ops.push_back(std::move(b));
    }
    return KrausSet(d_out, d_in, std::move(ops));
  }

 private:
  Index d_out_ = 0;
  Index d_in_ = 0;
  std::vector<Matrix> ops_;
};

class ChoiMatrix {
 public:
  ChoiMatrix() = default;

  ChoiMatrix(Index d_out, Index d_in, SymMatrix j) : d_out_(d_out), d_in_(d_in), j_(std::move(j)) {
    require(d_out_ >= 1 && d_in_ >= 1, ErrorKind::InvalidInput, "Choi dimensions must be positive");
    require(j_.dim() == d_out_ * d_in_, ErrorKind::DimensionMismatch,
            "Choi matrix dimension " + std::to_string(j_.dim()) + " != D*n = " + std::to_string(d_out_ * d_in_));
  }

  Index d_out() const { return d_out_; }
  Index d_in() const { return d_in_; }
  Index dim() const { return j_.dim(); }
  const SymMatrix& j() const { return j_; }
  const Matrix& matrix() const { return j_.matrix(); }
  double operator()(Index a, Index b) const { return j_(a, b); }

 private:
  Index d_out_ = 0;
  Index d_in_ = 0;
  SymMatrix j_;
};

// ---------------------------------------------------------------------------
// application

inline DensityMatrix apply_kraus(const KrausSet& ch, const DensityMatrix& rho) {
  require(rho.dim() == ch.d_in(), ErrorKind::DimensionMismatch,
          "apply_kraus: state dim " + std::to_string(rho.dim()) + " != channel input dim " + std::to_string(ch.d_in()));
  Matrix out = Matrix::Zero(ch.d_out(), ch.d_out());
  for (const Matrix& b : ch.operators()) out += b * rho.matrix().matrix() * b.transpose();
  return DensityMatrix(SymMatrix(out), false);
}

inline DensityMatrix apply_choi(const ChoiMatrix& j, const DensityMatrix& rho) {
  const Index d = j.d_out(), n = j.d_in();
  require(rho.dim() == n, ErrorKind::DimensionMismatch,
          "apply_choi: state dim " + std::to_string(rho.dim()) + " != channel input dim " + std::to_string(n));
  const Matrix& r = rho.matrix().matrix();
  Matrix out = Matrix::Zero(d, d);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) out(a, b) = j.matrix().block(a * n, b * n, n, n).cwiseProduct(r).sum();
  return DensityMatrix(SymMatrix(out), false);
}

inline ChoiMatrix kraus_to_choi(const KrausSet& ch) {
  Matrix v = ch.stacked();
  return ChoiMatrix(ch.d_out(), ch.d_in(), SymMatrix(Matrix(v * v.transpose())));
}

// ---------------------------------------------------------------------------
// partial traces and constraint residuals

/// n x n matrix sum_j J_{jk;jk'} (the trace-preservation Gram).
inline SymMatrix partial_trace_out(const ChoiMatrix& j) {
  const Index d = j.d_out(), n = j.d_in();
  Matrix g = Matrix::Zero(n, n);
  for (Index a = 0; a < d; ++a) g += j.matrix().block(a * n, a * n, n, n);
  return SymMatrix(g);
}

/// D x D matrix sum_k J_{jk;j'k} (the unit-preservation Gram).
inline SymMatrix partial_trace_in(const ChoiMatrix& j) {
  const Index d = j.d_out(), n = j.d_in();
  Matrix g(d, d);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) g(a, b) = j.matrix().block(a * n, b * n, n, n).trace();
  return SymMatrix(g);
}

inline SymMatrix constraint_gram(const ChoiMatrix& j, ConstraintKind kind) {
  return kind == ConstraintKind::TracePreserving ? partial_trace_out(j) : partial_trace_in(j);
}

/// Max-abs deviation of the relevant partial trace from the identity.
inline double constraint_residual(const ChoiMatrix& j, ConstraintKind kind) {
  SymMatrix g = constraint_gram(j, kind);
  return (g.matrix() - Matrix::Identity(g.dim(), g.dim())).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// rank and extraction

struct RankCuts {
  double absolute = 1e-5;
  double ratio = 1e4;
};

/// Eigenvalue count scanning downward from the largest: stops at the first
/// value below the absolute cut or whose predecessor exceeds it by more than
/// the ratio cut. Negative values count as zero.
inline Index numerical_rank(std::vector<double> values, RankCuts cuts = {}) {
  for (double& v : values) v = std::max(v, 0.0);
  std::sort(values.begin(), values.end(), std::greater<>());
  Index rank = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < cuts.absolute) break;
    if (i > 0 && values[i - 1] > cuts.ratio * values[i]) break;
    ++rank;
  }
  return rank;
}

inline Index numerical_rank(const Vector& values, RankCuts cuts = {}) {
  return numerical_rank(std::vector<double>(values.data(), values.data() + values.size()), cuts);
}

inline Index numerical_rank(const ChoiMatrix& j, RankCuts cuts = {}) {
  return numerical_rank(sym_eigenvalues(j.j()), cuts);
}

/// Negative eigenvalues down to this (relative to max(1, largest)) are
/// treated as interior-point noise and clipped.
inline constexpr double kNegativeClip = 1e-8;

/// Flips v so that its largest-magnitude entry is positive.
inline void fix_sign(Eigen::Ref<Vector> v) {
  Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0) v = -v;
}

/// Kraus operators B_s = sqrt(lambda_s) unvec(v_s) from the eigendecomposition
/// of J, ordered by descending eigenvalue. Eigenvalues at or below
/// rank_tol * largest are dropped.
inline KrausSet choi_to_kraus(const ChoiMatrix& j, double rank_tol = 1e-10) {
  EigDecomposition e = sym_eig(j.j());
  const Index dim = j.dim();
  const double top = e.values(dim - 1);
  const double scale = std::max(1.0, top);
  if (e.values(0) < -kNegativeClip * scale) {
    fail(ErrorKind::NotPsd, "choi_to_kraus: eigenvalue " + std::to_string(e.values(0)) + " is significantly negative");
  }
  std::vector<Matrix> ops;
  for (Index i = dim - 1; i >= 0; --i) {
    const double lam = e.values(i);
    if (!(lam > rank_tol * scale)) break;
    Vector v = e.vectors.col(i);
    fix_sign(v);
    v *= std::sqrt(lam);
    Matrix b(j.d_out(), j.d_in());
    for (Index a = 0; a < j.d_out(); ++a)
      for (Index k = 0; k < j.d_in(); ++k) b(a, k) = v(multi_index(a, k, j.d_in()));
    ops.push_back(std::move(b));
  }
  if (ops.empty()) ops.push_back(Matrix::Zero(j.d_out(), j.d_in()));
  return KrausSet(j.d_out(), j.d_in(), std::move(ops));
}

// ---------------------------------------------------------------------------
// G^{-1/2} constraint restoration

/// n x n Gram sum_s B_s^T B_s.
inline SymMatrix gram_tp(const KrausSet& ch) {
  Matrix g = Matrix::Zero(ch.d_in(), ch.d_in());
  for (const Matrix& b : ch.operators()) g += b.transpose() * b;
  return SymMatrix(g);
}

/// D x D Gram sum_s B_s B_s^T.
inline SymMatrix gram_unit(const KrausSet& ch) {
  Matrix g = Matrix::Zero(ch.d_out(), ch.d_out());
  for (const Matrix& b : ch.operators()) g += b * b.transpose();
  return SymMatrix(g);
}

inline KrausSet adjust_tp(const KrausSet& ch, double rank_tol = kDefaultRankTol) {
  const Matrix w = inv_sqrt_psd(gram_tp(ch), rank_tol).matrix();
  std::vector<Matrix> ops;
  for (const Matrix& b : ch.operators()) ops.push_back(b * w);
  return KrausSet(ch.d_out(), ch.d_in(), std::move(ops));
}

inline KrausSet adjust_unit(const KrausSet& ch, double rank_tol = kDefaultRankTol) {
  const Matrix w = inv_sqrt_psd(gram_unit(ch), rank_tol).matrix();
  std::vector<Matrix> ops;
  for (const Matrix& b : ch.operators()) ops.push_back(w * b);
  return KrausSet(ch.d_out(), ch.d_in(), std::move(ops));
}

inline KrausSet adjust(const KrausSet& ch, ConstraintKind kind, double rank_tol = kDefaultRankTol) {
  return kind == ConstraintKind::TracePreserving ? adjust_tp(ch, rank_tol) : adjust_unit(ch, rank_tol);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Sandwiches J with G^{-1/2} on the input (TP) or output (Unit) index pair.
inline ChoiMatrix adjust_choi(const ChoiMatrix& j, ConstraintKind kind, double rank_tol = kDefaultRankTol) {
  const Matrix w = inv_sqrt_psd(constraint_gram(j, kind), rank_tol).matrix();
  const Matrix t = kind == ConstraintKind::TracePreserving ? kron(Matrix::Identity(j.d_out(), j.d_out()), w)
                                                           : kron(w, Matrix::Identity(j.d_in(), j.d_in()));
  return ChoiMatrix(j.d_out(), j.d_in(), SymMatrix(Matrix(t * j.matrix() * t)));
}

/// Exchanges the roles of input and output: J'_{kj;k'j'} = J_{jk;j'k'}.
inline ChoiMatrix swap_io(const ChoiMatrix& j) {
  const Index d = j.d_out(), n = j.d_in();
  Matrix out(d * n, d * n);
  for (Index a = 0; a < d; ++a)
    for (Index k = 0; k < n; ++k)
      for (Index b = 0; b < d; ++b)
        for (Index kp = 0; kp < n; ++kp) out(k * d + a, kp * d + b) = j(a * n + k, b * n + kp);
  return ChoiMatrix(n, d, SymMatrix::from_symmetric(std::move(out)));
}

}  // namespace choiforge
