#pragma once

// Primal-dual interior-point solver for
//
//   maximize Tr(J S)  subject to  Tr(J A_c) = beta_c,  J >= 0
//
// with dual  minimize beta^T y  subject to  Z = sum_c y_c A_c - S >= 0.
//
// Infeasible-start path following with Nesterov-Todd scaling and a Mehrotra
// predictor-corrector. Internally the problem is solved in the standard
// minimization form with C = -S / scale.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "choiforge/channel.hpp"
#include "choiforge/error.hpp"
#include "choiforge/fidelity.hpp"
#include "choiforge/linalg.hpp"

namespace choiforge {

struct LinearConstraint {
  SymMatrix a;
  double beta = 0.0;
};

class SdpProblem {
 public:
  SdpProblem() = default;

  /// Validates dimensions and rejects linearly dependent constraint sets.
  SdpProblem(FidelityTensor s, std::vector<LinearConstraint> constraints)
      : s_(std::move(s)), constraints_(std::move(constraints)) {
    for (std::size_t c = 0; c < constraints_.size(); ++c) {
      require(constraints_[c].a.dim() == s_.dim(), ErrorKind::DimensionMismatch,
              "constraint " + std::to_string(c) + " has dimension " + std::to_string(constraints_[c].a.dim()) +
                  ", objective has " + std::to_string(s_.dim()));
      require(std::isfinite(constraints_[c].beta), ErrorKind::InvalidInput, "constraint rhs is not finite");
    }
    check_independent();
  }

  const FidelityTensor& objective() const { return s_; }
  const std::vector<LinearConstraint>& constraints() const { return constraints_; }
  Index dim() const { return s_.dim(); }
  Index num_constraints() const { return static_cast<Index>(constraints_.size()); }

  Vector rhs() const {
    Vector b(num_constraints());
    for (Index c = 0; c < num_constraints(); ++c) b(c) = constraints_[static_cast<std::size_t>(c)].beta;
    return b;
  }

  /// A(J)_c = Tr(J A_c).
  Vector apply(const Matrix& j) const {
    Vector out(num_constraints());
    for (Index c = 0; c < num_constraints(); ++c)
      out(c) = constraints_[static_cast<std::size_t>(c)].a.matrix().cwiseProduct(j).sum();
    return out;
  }

  /// sum_c y_c A_c.
  Matrix adjoint(const Vector& y) const {
    Matrix out = Matrix::Zero(dim(), dim());
    for (Index c = 0; c < num_constraints(); ++c) out += y(c) * constraints_[static_cast<std::size_t>(c)].a.matrix();
    return out;
  }

 private:
  void check_independent() const {
    const Index m = num_constraints();
    if (m == 0) return;
    Matrix g(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j <= i; ++j) {
        g(i, j) = trace_inner(constraints_[static_cast<std::size_t>(i)].a, constraints_[static_cast<std::size_t>(j)].a);
        g(j, i) = g(i, j);
      }
    Vector ev = sym_eigenvalues(SymMatrix(g));
    if (!(ev(m - 1) > 0.0) || ev(0) <= 1e-10 * ev(m - 1)) {
      fail(ErrorKind::DuplicateConstraint, "constraint matrices are linearly dependent (gram eigenvalue " +
                                               std::to_string(ev(0)) + ")");
    }
  }

  FidelityTensor s_;
  std::vector<LinearConstraint> constraints_;
};

// ---------------------------------------------------------------------------
// constraint builders

namespace detail {

inline LinearConstraint pair_constraint(Index dim, const std::vector<std::pair<Index, Index>>& pairs, double beta) {
  Matrix a = Matrix::Zero(dim, dim);
  for (auto [p, q] : pairs) {
    if (p == q) {
      a(p, p) += 1.0;
    } else {
      a(p, q) += 0.5;
      a(q, p) += 0.5;
    }
  }
  return {SymMatrix::from_symmetric(std::move(a)), beta};
}

// Tr(J A) = sum_k J_{jk;j'k} for the unit-preservation Gram entry (j, j').
inline LinearConstraint unit_entry(Index n, Index d, Index j, Index jp, double beta) {
  std::vector<std::pair<Index, Index>> pairs;
  for (Index k = 0; k < n; ++k) pairs.emplace_back(j * n + k, jp * n + k);
  return pair_constraint(d * n, pairs, beta);
}

}  // namespace detail

/// Partial-trace equality constraints: n(n+1)/2 for TP, D(D+1)/2 for Unit,
/// one per unordered index pair.
inline std::vector<LinearConstraint> build_constraints(Index n, Index d, ConstraintKind kind) {
  require(n >= 1 && d >= 1, ErrorKind::InvalidInput, "build_constraints: dimensions must be positive");
  std::vector<LinearConstraint> out;
  if (kind == ConstraintKind::TracePreserving) {
    for (Index k = 0; k < n; ++k)
      for (Index kp = k; kp < n; ++kp) {
        std::vector<std::pair<Index, Index>> pairs;
        for (Index j = 0; j < d; ++j) pairs.emplace_back(j * n + k, j * n + kp);
        out.push_back(detail::pair_constraint(d * n, pairs, k == kp ? 1.0 : 0.0));
      }
  } else {
    for (Index j = 0; j < d; ++j)
      for (Index jp = j; jp < d; ++jp) out.push_back(detail::unit_entry(n, d, j, jp, j == jp ? 1.0 : 0.0));
  }
  return out;
}

/// Homogeneous unit-Gram constraints (off-diagonals zero, consecutive
/// diagonal entries equal) plus the normalization Tr(J Q) = norm_const.
inline std::vector<LinearConstraint> build_projective_constraints(Index n, Index d, const DenominatorTensor& q,
                                                                  double norm_const) {
  require(q.d_in == n && q.d_out == d, ErrorKind::DimensionMismatch, "build_projective_constraints: Q dims mismatch");
  std::vector<LinearConstraint> out;
  for (Index j = 0; j < d; ++j)
    for (Index jp = j + 1; jp < d; ++jp) out.push_back(detail::unit_entry(n, d, j, jp, 0.0));
  for (Index j = 1; j < d; ++j) {
    LinearConstraint hi = detail::unit_entry(n, d, j, j, 0.0);
    LinearConstraint lo = detail::unit_entry(n, d, j - 1, j - 1, 0.0);
    out.push_back({hi.a - lo.a, 0.0});
  }
  out.push_back({q.q, norm_const});
  return out;
}

inline std::vector<LinearConstraint> build_projective_constraints(Index n, Index d, const DenominatorTensor& q) {
  // Tr(Q) / D = sum_l nu_l for unit-norm inputs.
  return build_projective_constraints(n, d, q, q.q.trace() / static_cast<double>(d));
}

// ---------------------------------------------------------------------------
// solver

enum class SdpStatus { Optimal, MaxIterations, NumericalFailure, Infeasible };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::MaxIterations: return "max-iterations";
    case SdpStatus::NumericalFailure: return "numerical-failure";
    case SdpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

struct SolverConfig {
  double tol_gap = 1e-8;
  double tol_feas = 1e-9;
  int max_iter = 200;
  double step_fraction = 0.98;
  /// Optional primal starting point; must be positive definite.
  std::optional<SymMatrix> start_j;
  bool record_trace = false;
  /// Runs the iteration in long double. Double precision stalls near a
  /// relative gap of 1e-12; extended precision reaches about 1e-15, which
  /// matters when the optimal face is poorly separated.
  bool extended_precision = false;

  void validate() const {
    require(tol_gap > 0 && tol_feas > 0 && max_iter > 0 && step_fraction > 0 && step_fraction < 1,
            ErrorKind::InvalidInput, "solver config: tolerances and step fraction must be positive, step < 1");
  }
};

struct IterationRecord {
  int iteration = 0;
  double primal_objective = 0;
  double dual_objective = 0;
  double gap = 0;  // Tr(J Z), unscaled
  double relative_gap = 0;
  double primal_residual = 0;
  double dual_residual = 0;
  double sigma = 0;
  double step_primal = 0;
  double step_dual = 0;
};

struct SdpSolution {
  ChoiMatrix j;
  Vector dual_y;
  SymMatrix dual_slack;
  double objective = 0;
  double gap = 0;
  SdpStatus status = SdpStatus::NumericalFailure;
  int iterations = 0;
  std::vector<IterationRecord> trace;
};

namespace detail {

template <class T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Largest alpha in (0, inf] with X + alpha dX >= 0, given X = L L^T.
template <class T>
T max_step(const MatrixT<T>& l, const MatrixT<T>& dx) {
  const auto lt = l.template triangularView<Eigen::Lower>();
  MatrixT<T> t = lt.solve(dx);
  t = lt.solve(t.transpose()).eval();
  t = (T(0.5) * (t + t.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<MatrixT<T>> es(t, Eigen::EigenvaluesOnly);
  const T lmin = es.eigenvalues().size() ? es.eigenvalues()(0) : T(0);
  return lmin < 0 ? T(-1) / lmin : std::numeric_limits<T>::infinity();
}

template <class M>
M sym(const M& m) {
  return (typename M::Scalar(0.5) * (m + m.transpose())).eval();
}

inline Matrix default_start(const SdpProblem& p) {
  const Index dim = p.dim();
  const Vector b = p.rhs();
  if (p.num_constraints() == 0) return Matrix::Identity(dim, dim);
  // Closed-form interior point c * I when the constraints admit one
  // (I/D for TP, I/n for Unit, I/D for the projective set).
  const Vector ai = p.apply(Matrix::Identity(dim, dim));
  const double denom = ai.squaredNorm();
  if (denom > 0) {
    const double c = ai.dot(b) / denom;
    if (c > 0 && (c * ai - b).norm() <= 1e-12 * (1.0 + b.norm())) return c * Matrix::Identity(dim, dim);
  }
  // Least-squares projection of I onto the affine set, if it stays interior.
  const Index m = p.num_constraints();
  Matrix g(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) g(i, j) = trace_inner(p.constraints()[i].a, p.constraints()[j].a);
  Vector z = solve_spd(SymMatrix(g), Matrix(b - ai));
  Matrix x = Matrix::Identity(dim, dim) + p.adjoint(z);
  if (min_eigenvalue(SymMatrix(x)) > 1e-3) return sym(x);
  return Matrix::Identity(dim, dim);
}

template <class T>
SdpSolution solve_impl(const SdpProblem& p, const SolverConfig& cfg) {
  using Mat = MatrixT<T>;
  using Vec = VectorT<T>;
  const Index dim = p.dim();
  const Index m = p.num_constraints();
  const Vec b = p.rhs().cast<T>();
  const Mat s_raw = p.objective().s.matrix().cast<T>();
  const T s_norm = s_raw.norm();
  const T scale = std::max(T(1), s_norm);
  const Mat c = -s_raw / scale;
  const T dimd = static_cast<T>(dim);
  const T b_norm = b.norm();

  std::vector<Mat> a(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) a[static_cast<std::size_t>(i)] = p.constraints()[static_cast<std::size_t>(i)].a.matrix().cast<T>();
  auto apply = [&](const Mat& x) {
    Vec out(m);
    for (Index i = 0; i < m; ++i) out(i) = a[static_cast<std::size_t>(i)].cwiseProduct(x).sum();
    return out;
  };
  auto adjoint = [&](const Vec& y) {
    Mat out = Mat::Zero(dim, dim);
    for (Index i = 0; i < m; ++i) out += y(i) * a[static_cast<std::size_t>(i)];
    return out;
  };

  Mat x;
  if (cfg.start_j) {
    require(cfg.start_j->dim() == dim, ErrorKind::DimensionMismatch, "solver start point has wrong dimension");
    require(min_eigenvalue(*cfg.start_j) > 0, ErrorKind::InvalidInput, "solver start point is not positive definite");
    x = cfg.start_j->matrix().cast<T>();
  } else {
    x = default_start(p).cast<T>();
  }
  Vec y = Vec::Zero(m);
  const T c_op = static_cast<T>(p.objective().s.matrix().operatorNorm()) / scale;
  Mat z = (T(1) + c_op) * Mat::Identity(dim, dim);

  SdpSolution sol;
  T best_primal = std::numeric_limits<T>::infinity();
  int primal_stall = 0;

  // Best iterate by the worst of the three termination ratios; returned when
  // the run ends without meeting the tolerances.
  Mat best_x, best_z;
  Vec best_y;
  T best_merit = std::numeric_limits<T>::infinity();
  int best_iter = 0;
  int stalled = 0;

  auto finish = [&](SdpStatus status, int iters) {
    if (status != SdpStatus::Optimal && best_x.size()) {
      x = best_x;
      y = best_y;
      z = best_z;
      iters = best_iter;
    }
    sol.status = status;
    sol.iterations = iters;
    sol.j = ChoiMatrix(p.objective().d_out, p.objective().d_in, SymMatrix(Matrix(x.template cast<double>())));
    sol.dual_y = (-scale * y).template cast<double>();
    sol.dual_slack = SymMatrix(Matrix((scale * z).template cast<double>()));
    sol.objective = trace_inner(sol.j.j(), p.objective().s);
    sol.gap = static_cast<double>(scale * x.cwiseProduct(z).sum());
    return sol;
  };

  const T tol_gap = static_cast<T>(cfg.tol_gap), tol_feas = static_cast<T>(cfg.tol_feas);
  for (int iter = 0; iter <= cfg.max_iter; ++iter) {
    const Vec rp = b - apply(x);
    const Mat rd = c - z - adjoint(y);
    const T pobj = -scale * c.cwiseProduct(x).sum();  // Tr(J S)
    const T dobj = -scale * b.dot(y);                 // beta^T y_reported
    const T gap = scale * x.cwiseProduct(z).sum();
    const T rel_gap = gap / (T(1) + std::abs(pobj));
    const T pres = rp.norm() / (T(1) + b_norm);
    const T dres = scale * rd.norm() / (T(1) + s_norm);

    IterationRecord rec{iter,
                        static_cast<double>(pobj),
                        static_cast<double>(dobj),
                        static_cast<double>(gap),
                        static_cast<double>(rel_gap),
                        static_cast<double>(pres),
                        static_cast<double>(dres),
                        0,
                        0,
                        0};

    if (pres <= tol_feas && dres <= tol_feas && rel_gap <= tol_gap &&
        std::abs(dobj - pobj) / (T(1) + std::abs(pobj)) <= 10 * tol_gap) {
      if (cfg.record_trace) sol.trace.push_back(rec);
      return finish(SdpStatus::Optimal, iter);
    }
    const T merit = std::max({rel_gap / tol_gap, pres / tol_feas, dres / tol_feas});
    if (merit < T(0.9) * best_merit) {
      stalled = 0;
    } else if (++stalled >= 5) {
      // No progress in five iterations: the iterates sit on the rounding
      // floor of the working precision.
      if (cfg.record_trace) sol.trace.push_back(rec);
      return finish(SdpStatus::NumericalFailure, iter);
    }
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
      best_y = y;
      best_z = z;
      best_iter = iter;
    }
    if (iter == cfg.max_iter) {
      if (cfg.record_trace) sol.trace.push_back(rec);
      break;
    }

    // Primal residual floor: the gap keeps shrinking but feasibility does not.
    if (pres < T(0.5) * best_primal) {
      best_primal = pres;
      primal_stall = 0;
    } else if (++primal_stall > 30 && pres > 1000 * tol_feas && rel_gap < T(1e-6)) {
      if (cfg.record_trace) sol.trace.push_back(rec);
      return finish(SdpStatus::Infeasible, iter);
    }

    Eigen::LLT<Mat> llx(x), llz(z);
    if (llx.info() != Eigen::Success || llz.info() != Eigen::Success) {
      if (cfg.record_trace) sol.trace.push_back(rec);
      return finish(SdpStatus::NumericalFailure, iter);
    }
    const Mat lx = llx.matrixL();
    const Mat lz = llz.matrixL();

    // Nesterov-Todd scaling: G^T Z G = G^{-1} X G^{-T} = diag(d), W = G G^T.
    Eigen::JacobiSVD<Mat> svd(lz.transpose() * lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec d = svd.singularValues();
    if (!(d.minCoeff() > 0)) {
      if (cfg.record_trace) sol.trace.push_back(rec);
      return finish(SdpStatus::NumericalFailure, iter);
    }
    const Vec dis = d.array().rsqrt();
    const Mat g = lx * svd.matrixV() * dis.asDiagonal();
    const Mat ginv = dis.asDiagonal() * svd.matrixU().transpose() * lz.transpose();
    const Mat w = sym(Mat(g * g.transpose()));

    std::vector<Mat> waw(static_cast<std::size_t>(m));
    Mat schur(m, m);
    for (Index j = 0; j < m; ++j) waw[static_cast<std::size_t>(j)] = sym(Mat(w * a[static_cast<std::size_t>(j)] * w));
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j <= i; ++j) {
        schur(i, j) = a[static_cast<std::size_t>(i)].cwiseProduct(waw[static_cast<std::size_t>(j)]).sum();
        schur(j, i) = schur(i, j);
      }
    Eigen::LLT<Mat> lls(schur);
    if (m > 0 && lls.info() != Eigen::Success) {
      if (cfg.record_trace) sol.trace.push_back(rec);
      return finish(SdpStatus::NumericalFailure, iter);
    }
    const Vec a_wrdw = apply(Mat(w * rd * w));

    // Solves  A(dX) = rp,  A^T dy + dZ = rd,  dX + W dZ W = G T G^T
    // where T solves the scaled Lyapunov equation (T D + D T)/2 = rc.
    auto direction = [&](const Mat& rc, Mat& dx, Vec& dy, Mat& dz) {
      Mat t(dim, dim);
      for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) t(i, j) = T(2) * rc(i, j) / (d(i) + d(j));
      const Mat rt = sym(Mat(g * t * g.transpose()));
      const Vec h = rp + a_wrdw - apply(rt);
      dy = m > 0 ? Vec(lls.solve(h)) : Vec();
      dz = sym(Mat(rd - adjoint(dy)));
      dx = sym(Mat(rt - w * dz * w));
      // One step of iterative refinement on A(dX) = rp; near the optimum the
      // cancellation in rt - W dZ W otherwise lets primal feasibility drift.
      if (m > 0) {
        const Vec de = lls.solve(Vec(rp - apply(dx)));
        const Mat ade = adjoint(de);
        dy += de;
        dz = sym(Mat(dz - ade));
        dx = sym(Mat(dx + w * ade * w));
      }
    };

    const T mu = x.cwiseProduct(z).sum() / dimd;
    const T frac = static_cast<T>(cfg.step_fraction);
    Mat dx, dz;
    Vec dy;
    const Mat dsq = d.array().square().matrix().asDiagonal();
    direction(Mat(-dsq), dx, dy, dz);
    T ap = std::min(T(1), frac * max_step<T>(lx, dx));
    T ad = std::min(T(1), frac * max_step<T>(lz, dz));
    const T mu_aff = (x + ap * dx).cwiseProduct(z + ad * dz).sum() / dimd;
    const T sigma = std::clamp(T(std::pow(mu_aff / mu, T(3))), T(0), T(1));

    const Mat dxs = ginv * dx * ginv.transpose();
    const Mat dzs = g.transpose() * dz * g;
    const Mat rc = sigma * mu * Mat::Identity(dim, dim) - dsq - sym(Mat(dxs * dzs));
    direction(rc, dx, dy, dz);
    ap = std::min(T(1), frac * max_step<T>(lx, dx));
    ad = std::min(T(1), frac * max_step<T>(lz, dz));

    rec.sigma = static_cast<double>(sigma);
    rec.step_primal = static_cast<double>(ap);
    rec.step_dual = static_cast<double>(ad);
    if (cfg.record_trace) sol.trace.push_back(rec);

    x = sym(Mat(x + ap * dx));
    if (m > 0) y += ad * dy;
    z = sym(Mat(z + ad * dz));
  }
  return finish(SdpStatus::MaxIterations, cfg.max_iter);
}

}  // namespace detail

inline SdpSolution solve(const SdpProblem& p, const SolverConfig& cfg = {}) {
  cfg.validate();
  return cfg.extended_precision ? detail::solve_impl<long double>(p, cfg) : detail::solve_impl<double>(p, cfg);
}

// ---------------------------------------------------------------------------
// independent certification

struct VerifyReport {
  double primal_residual = 0;    // max_c |Tr(J A_c) - beta_c|
  double min_eig_j = 0;          // relative to max(1, |lambda_max(J)|)
  double min_eig_slack = 0;      // of sum y A - S, relative to 1 + ||S||_F
  double dual_residual = 0;      // ||(sum y A - S) - slack||_F / (1 + ||S||_F)
  double relative_gap = 0;       // (beta^T y - Tr(J S)) / (1 + |Tr(J S)|)
  double complementarity = 0;    // Tr(J Z) / (1 + |Tr(J S)|) with the recomputed Z
  double objective = 0;

  bool passes(double tol_primal = 1e-8, double tol_eig = 1e-8, double tol_gap = 1e-7) const {
    return primal_residual <= tol_primal && min_eig_j >= -tol_eig && min_eig_slack >= -tol_eig &&
           std::abs(relative_gap) <= tol_gap && std::abs(complementarity) <= tol_gap;
  }
};

/// Recomputes residuals from the problem data and the returned (J, y) only.
inline VerifyReport verify(const SdpProblem& p, const SdpSolution& sol) {
  VerifyReport r;
  const Matrix& j = sol.j.matrix();
  require(j.rows() == p.dim(), ErrorKind::DimensionMismatch, "verify: solution dimension mismatch");
  const Vector resid = p.apply(j) - p.rhs();
  r.primal_residual = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
  const Vector ej = sym_eigenvalues(sol.j.j());
  r.min_eig_j = ej(0) / std::max(1.0, std::abs(ej(ej.size() - 1)));
  const double s_norm = p.objective().s.frobenius_norm();
  Vector y = sol.dual_y.size() == p.num_constraints() ? sol.dual_y : Vector::Zero(p.num_constraints());
  const Matrix z = p.adjoint(y) - p.objective().s.matrix();
  r.min_eig_slack = min_eigenvalue(SymMatrix(z)) / (1.0 + s_norm);
  r.dual_residual =
      sol.dual_slack.dim() == p.dim() ? (z - sol.dual_slack.matrix()).norm() / (1.0 + s_norm) : 0.0;
  r.objective = trace_inner(sol.j.j(), p.objective().s);
  r.relative_gap = (p.rhs().dot(y) - r.objective) / (1.0 + std::abs(r.objective));
  r.complementarity = j.cwiseProduct(z).sum() / (1.0 + std::abs(r.objective));
  return r;
}

/// Drops J >= 0 and keeps only the linear constraints, regularized by
/// -||J||_F^2 / 2 so the linear problem is bounded: J = S - sum y A with
/// A(J) = beta. Returns the eigenvalues of that J.
inline Vector lp_limit_eigenvalues(const SdpProblem& p) {
  const Index m = p.num_constraints();
  const Matrix& s = p.objective().s.matrix();
  Vector y = Vector::Zero(m);
  if (m > 0) {
    Matrix g(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index k = 0; k < m; ++k) g(i, k) = trace_inner(p.constraints()[i].a, p.constraints()[k].a);
    y = solve_spd(SymMatrix(g), Matrix(p.apply(s) - p.rhs()));
  }
  return sym_eigenvalues(SymMatrix(Matrix(s - p.adjoint(y))));
}

}  // namespace choiforge
