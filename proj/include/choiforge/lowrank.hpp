#pragma once

// Fixed Kraus rank eigen-iteration. The channel is held as a Dn x N_s matrix
// B with J = B B^T, kept lower-diagonal (B(i, s) = 0 for s > i) so that the
// columns have different active lengths. Each iteration:
//
//   1. builds the homogeneous helper constraints from the current B,
//   2. takes an eigenvector of S - lambda (x) delta restricted to the packed
//      pattern and to the complement of the helpers,
//   3. restores the full constraint with G^{-1/2} and re-gauges by QR,
//   4. recomputes the multipliers lambda from the new B.
//
// Only the trace of the Gram (|B|^2) is enforced inside the eigenproblem;
// step 3 repairs the rest.

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
#include "choiforge/rng.hpp"

namespace choiforge {

struct LowRankDims {
  Index full = 0;     // nonzeros of the lower-diagonal pattern
  Index reduced = 0;  // after removing the helper constraints
};

inline Index num_helper_constraints(Index n, Index d, ConstraintKind kind) {
  const Index m = kind == ConstraintKind::TracePreserving ? n : d;
  return m * (m + 1) / 2 - 1;
}

inline LowRankDims dims(Index n, Index d, Index n_s, ConstraintKind kind) {
  require(n >= 1 && d >= 1, ErrorKind::InvalidInput, "dims: dimensions must be positive");
  require(n_s >= 1 && n_s <= d * n, ErrorKind::InvalidInput,
          "dims: Kraus rank " + std::to_string(n_s) + " outside [1, " + std::to_string(d * n) + "]");
  LowRankDims out;
  out.full = (2 * d * n - n_s + 1) * n_s / 2;
  out.reduced = out.full - num_helper_constraints(n, d, kind);
  return out;
}

/// Lower-diagonal B in packed form: rows i = j n + k in order, and within a
/// row the columns s = 0 .. min(i, N_s - 1).
class LowerDiagB {
 public:
  LowerDiagB() = default;
  LowerDiagB(Index n, Index d, Index n_s, Vector entries) : n_(n), d_(d), n_s_(n_s), entries_(std::move(entries)) {
    require(entries_.size() == dims(n, d, n_s, ConstraintKind::TracePreserving).full, ErrorKind::DimensionMismatch,
            "LowerDiagB: packed length " + std::to_string(entries_.size()) + " does not match the pattern");
    require(entries_.allFinite(), ErrorKind::InvalidInput, "LowerDiagB: non-finite entries");
  }

  Index n() const { return n_; }
  Index d() const { return d_; }
  Index n_s() const { return n_s_; }
  Index rows() const { return d_ * n_; }
  const Vector& entries() const { return entries_; }
  Vector& entries() { return entries_; }

  /// Packed position of row i's first entry.
  static Index row_offset(Index i, Index n_s) {
    return i <= n_s ? i * (i + 1) / 2 : n_s * (n_s + 1) / 2 + (i - n_s) * n_s;
  }
  static Index row_length(Index i, Index n_s) { return std::min(i + 1, n_s); }

  Matrix matrix() const {
    Matrix b = Matrix::Zero(rows(), n_s_);
    for (Index i = 0; i < rows(); ++i) {
      const Index off = row_offset(i, n_s_);
      for (Index s = 0; s < row_length(i, n_s_); ++s) b(i, s) = entries_(off + s);
    }
    return b;
  }

  KrausSet kraus() const { return KrausSet::from_stacked(d_, n_, matrix()); }

 private:
  Index n_ = 0, d_ = 0, n_s_ = 0;
  Vector entries_;
};

/// Throws if b has an entry above the pattern larger than tol * max|b|.
inline LowerDiagB pack(const Matrix& b, Index n, Index d, double tol = 0.0) {
  require(b.rows() == d * n, ErrorKind::DimensionMismatch, "pack: B must have D*n rows");
  require(b.cols() >= 1 && b.cols() <= d * n, ErrorKind::InvalidInput, "pack: column count outside [1, D*n]");
  const Index n_s = b.cols();
  const double cut = tol * (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  Vector e(dims(n, d, n_s, ConstraintKind::TracePreserving).full);
  for (Index i = 0; i < b.rows(); ++i) {
    const Index off = LowerDiagB::row_offset(i, n_s);
    for (Index s = 0; s < n_s; ++s) {
      if (s <= i) {
        e(off + s) = b(i, s);
      } else if (std::abs(b(i, s)) > cut) {
        fail(ErrorKind::InvalidInput, "pack: entry (" + std::to_string(i) + ", " + std::to_string(s) +
                                          ") lies above the lower-diagonal pattern");
      }
    }
  }
  return LowerDiagB(n, d, n_s, std::move(e));
}

inline Matrix unpack(const LowerDiagB& b) { return b.matrix(); }

enum class EigPickMode { MaxEigenvalue, IndexOffset };

struct EigPick {
  EigPickMode mode = EigPickMode::MaxEigenvalue;
  Index offset = 0;  // counted down from the largest eigenvalue

  static EigPick max() { return {}; }
  static EigPick index_offset(Index k) { return {EigPickMode::IndexOffset, k}; }
  Index position() const { return mode == EigPickMode::MaxEigenvalue ? 0 : offset; }
};

struct LowRankConfig {
  int max_iter = 500;
  double fidelity_tol = 1e-10;
  EigPick eig_pick;
  std::uint64_t seed = 0;
  int stagnation_window = 25;
  int max_escapes = 3;
  int max_restarts = 10;
  /// Independent random starts; the best result is returned. The N_s = 1
  /// problem has many stationary points and one start often stops at one.
  int starts = 1;
  bool record_trace = false;

  void validate() const {
    require(max_iter > 0 && fidelity_tol > 0 && stagnation_window > 0 && max_escapes >= 0 && max_restarts >= 0 &&
                starts >= 1,
            ErrorKind::InvalidInput, "lowrank config: limits must be positive");
  }
};

struct IterState {
  LowerDiagB b;
  SymMatrix lambda;  // n x n for TP, D x D for Unit
  double fidelity = 0;
  int iteration = 0;
};

// ---------------------------------------------------------------------------
// building blocks

namespace detail {

inline Index gram_dim(Index n, Index d, ConstraintKind kind) {
  return kind == ConstraintKind::TracePreserving ? n : d;
}

// lambda (x) delta in the multi-index: delta_jj' lambda_kk' for TP,
// lambda_jj' delta_kk' for Unit.
inline Matrix lambda_tensor(const SymMatrix& lambda, Index n, Index d, ConstraintKind kind) {
  return kind == ConstraintKind::TracePreserving ? kron(Matrix::Identity(d, d), lambda.matrix())
                                                 : kron(lambda.matrix(), Matrix::Identity(n, n));
}

// A full Dn x Dn operator restricted to the packed pattern: block diagonal
// over s, each block the operator on the active rows s .. Dn-1.
inline Matrix packed_operator(const Matrix& op, Index n_s) {
  const Index rows = op.rows();
  const Index dim = LowerDiagB::row_offset(rows, n_s);
  Matrix out = Matrix::Zero(dim, dim);
  for (Index i = 0; i < rows; ++i) {
    const Index oi = LowerDiagB::row_offset(i, n_s);
    for (Index i2 = 0; i2 < rows; ++i2) {
      const Index oi2 = LowerDiagB::row_offset(i2, n_s);
      const Index smax = std::min(LowerDiagB::row_length(i, n_s), LowerDiagB::row_length(i2, n_s));
      for (Index s = 0; s < smax; ++s) out(oi + s, oi2 + s) = op(i, i2);
    }
  }
  return out;
}

inline LowerDiagB regauge(const Matrix& b, Index n, Index d) {
  const Index n_s = b.cols();
  auto [q, r] = qr(Matrix(b.topRows(n_s).transpose()));
  Matrix out = b * q;
  for (Index i = 0; i < n_s; ++i)
    for (Index s = i + 1; s < n_s; ++s) out(i, s) = 0.0;
  return pack(out, n, d);
}

}  // namespace detail

/// Packed vectors C_m with <C_m|X> = G(B, X) + G(X, B) for an off-diagonal
/// pair, or G_mm(B, X) - G_{m-1,m-1}(B, X) for consecutive diagonals, where G
/// is the Gram of the chosen constraint (input index for TP, output index for
/// Unit). The current B is orthogonal to all of them when its Gram is a
/// multiple of the identity.
inline std::vector<Vector> helper_constraints(const LowerDiagB& b, ConstraintKind kind) {
  const Index n = b.n(), d = b.d(), n_s = b.n_s();
  const Matrix bm = b.matrix();
  const bool tp = kind == ConstraintKind::TracePreserving;
  const Index m = detail::gram_dim(n, d, kind);
  // Row of the multi-index with the Gram index replaced: for TP the Gram runs
  // over k, so (j, q) -> j n + q; for Unit over j, so (q, k) -> q n + k.
  auto row = [&](Index q, Index other) { return tp ? multi_index(other, q, n) : multi_index(q, other, n); };
  const Index other_dim = tp ? d : n;

  auto add_term = [&](Matrix& c, Index target, Index source, double w) {
    // c(row(target, o), s) += w * B(row(source, o), s)
    for (Index o = 0; o < other_dim; ++o) c.row(row(target, o)) += w * bm.row(row(source, o));
  };

  std::vector<Vector> out;
  for (Index a = 0; a < m; ++a)
    for (Index a2 = a + 1; a2 < m; ++a2) {
      Matrix c = Matrix::Zero(bm.rows(), n_s);
      add_term(c, a2, a, 1.0);
      add_term(c, a, a2, 1.0);
      out.push_back(pack(c, n, d, std::numeric_limits<double>::infinity()).entries());
    }
  for (Index a = 1; a < m; ++a) {
    Matrix c = Matrix::Zero(bm.rows(), n_s);
    add_term(c, a, a, 1.0);
    add_term(c, a - 1, a - 1, -1.0);
    out.push_back(pack(c, n, d, std::numeric_limits<double>::infinity()).entries());
  }
  return out;
}

struct EigCandidate {
  LowerDiagB b;
  double mu = 0;
};

namespace detail {

// Eigenvectors of the packed, helper-deflated matrix, descending by
// eigenvalue, each normalized to |B|^2 = norm2. With q given, solves the
// generalized problem op b = mu q b instead.
inline std::vector<EigCandidate> eig_candidates(const Matrix& op, const Matrix* q, const IterState& state,
                                                ConstraintKind kind, double norm2, const LowRankConfig& cfg,
                                                Index extra) {
  const LowerDiagB& b = state.b;
  const Index n_s = b.n_s();
  const Matrix sp = packed_operator(op, n_s);
  const std::vector<Vector> helpers = helper_constraints(b, kind);
  Matrix c(sp.rows(), static_cast<Index>(helpers.size()));
  for (std::size_t h = 0; h < helpers.size(); ++h) c.col(static_cast<Index>(h)) = helpers[h];
  const double cnorm = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
  const Matrix z = complement_basis(c, sp.rows(), 1e-10 * std::max(1.0, cnorm));
  const Matrix red = z.transpose() * sp * z;

  Vector values;
  Matrix vectors;
  if (q) {
    const Matrix qp = z.transpose() * packed_operator(*q, n_s) * z;
    Eigen::LLT<Matrix> llt(0.5 * (qp + qp.transpose()));
    const Vector qd = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (qp + qp.transpose()), Eigen::EigenvaluesOnly).eigenvalues();
    if (llt.info() != Eigen::Success || !(qd.size() == 0 || qd(0) > 1e-12 * std::max(1.0, qd(qd.size() - 1)))) {
      fail(ErrorKind::DegenerateDenominator, "lowrank: denominator is singular on the active subspace");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(0.5 * (red + red.transpose()), 0.5 * (qp + qp.transpose()));
    if (ges.info() != Eigen::Success) fail(ErrorKind::Factorization, "lowrank: generalized eigensolver failed");
    values = ges.eigenvalues();
    vectors = ges.eigenvectors();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (red + red.transpose()));
    if (es.info() != Eigen::Success) fail(ErrorKind::Factorization, "lowrank: eigensolver failed");
    values = es.eigenvalues();
    vectors = es.eigenvectors();
  }
  const Index k = values.size();
  const Index pos = std::min(cfg.eig_pick.position(), k - 1);
  const double spread = std::max(1.0, values.cwiseAbs().maxCoeff());
  std::vector<EigCandidate> out;
  for (Index idx = k - 1 - pos; idx >= 0; --idx) {
    // The picked eigenvector, plus any numerically degenerate with it and up
    // to `extra` further ones.
    const bool tie = std::abs(values(idx) - values(k - 1 - pos)) <= 1e-10 * spread;
    if (!out.empty() && !tie && static_cast<Index>(out.size()) > extra) break;
    Vector v = z * vectors.col(idx);
    const double nv = v.norm();
    if (!(nv > 0)) continue;
    v *= std::sqrt(norm2) / nv;
    // Align with the current iterate so damping interpolates sensibly.
    if (v.dot(b.entries()) < 0) v = -v;
    out.push_back({LowerDiagB(b.n(), b.d(), n_s, std::move(v)), values(idx)});
  }
  return out;
}

}  // namespace detail

/// The picked eigenvector of S - lambda (x) delta on the packed, helper-free
/// subspace, normalized to |B|^2 = n (TP) or D (Unit). Not yet restored.
inline IterState eig_step(const FidelityTensor& s, const IterState& state, ConstraintKind kind,
                          const LowRankConfig& cfg = {}) {
  const Index n = state.b.n(), d = state.b.d();
  require(s.d_in == n && s.d_out == d, ErrorKind::DimensionMismatch, "eig_step: tensor and state dimensions differ");
  const Matrix op = s.s.matrix() - detail::lambda_tensor(state.lambda, n, d, kind);
  const double norm2 = static_cast<double>(kind == ConstraintKind::TracePreserving ? n : d);
  std::vector<EigCandidate> c = detail::eig_candidates(op, nullptr, state, kind, norm2, cfg, 0);
  IterState out = state;
  out.b = std::move(c.front().b);
  return out;
}

/// G^{-1/2} restoration followed by the QR re-gauge back to lower-diagonal
/// form. Throws SingularGram when the Gram of B is singular.
inline IterState restore_and_regauge(const IterState& state, ConstraintKind kind, double rank_tol = 1e-10) {
  const LowerDiagB& b = state.b;
  const KrausSet adjusted = adjust(b.kraus(), kind, rank_tol);
  IterState out = state;
  out.b = detail::regauge(adjusted.stacked(), b.n(), b.d());
  return out;
}

/// lambda = Herm of the Gram-index contraction of B with S B: for TP
/// lambda_kq = sum_{s,j} B_{jq;s} (S B)_{jk;s}; for Unit
/// lambda_ji = sum_{s,k} B_{ik;s} (S B)_{jk;s}.
inline SymMatrix lagrange_multipliers(const Matrix& t, const LowerDiagB& b, ConstraintKind kind) {
  const Index n = b.n(), d = b.d();
  const Matrix bm = b.matrix();
  const Matrix tb = t * bm;
  const Index m = detail::gram_dim(n, d, kind);
  Matrix lam = Matrix::Zero(m, m);
  for (Index s = 0; s < b.n_s(); ++s) {
    Matrix bs(d, n), ts(d, n);
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < n; ++k) {
        bs(j, k) = bm(multi_index(j, k, n), s);
        ts(j, k) = tb(multi_index(j, k, n), s);
      }
    lam += kind == ConstraintKind::TracePreserving ? Matrix(ts.transpose() * bs) : Matrix(ts * bs.transpose());
  }
  return SymMatrix(lam);
}

inline IterState lagrange_update(const FidelityTensor& s, const IterState& state, ConstraintKind kind) {
  IterState out = state;
  out.lambda = lagrange_multipliers(s.s.matrix(), state.b, kind);
  return out;
}

// ---------------------------------------------------------------------------
// driver

enum class LowRankStatus { Converged, Stalled, MaxIterations };

inline const char* to_string(LowRankStatus s) {
  switch (s) {
    case LowRankStatus::Converged: return "converged";
    case LowRankStatus::Stalled: return "stalled";
    case LowRankStatus::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

struct LowRankIteration {
  int iteration = 0;
  double fidelity = 0;
  double constraint_residual = 0;
  double gram_min_eig = 0;  // of the unrestored eigenvector's Gram
  double step = 0;          // accepted damping factor, 0 if rejected
  Index eig_offset = 0;
};

struct LowRankResult {
  KrausSet kraus;
  double fidelity = 0;  // Tr(J S), or the ratio for run_ratio
  LowRankStatus status = LowRankStatus::MaxIterations;
  int iterations = 0;
  int restarts = 0;
  int escapes = 0;
  std::vector<LowRankIteration> trace;
};

namespace detail {

struct Objective {
  const FidelityTensor* s = nullptr;
  const DenominatorTensor* q = nullptr;

  double value(const LowerDiagB& b) const {
    const Matrix bm = b.matrix();
    const double num = (bm.transpose() * s->s.matrix() * bm).trace();
    if (!q) return num;
    const double den = (bm.transpose() * q->q.matrix() * bm).trace();
    if (!(den > 0)) fail(ErrorKind::DegenerateDenominator, "lowrank: zero denominator");
    return num / den;
  }
};

inline LowerDiagB random_lower_diag(Index n, Index d, Index n_s, Rng& rng) {
  Vector e(dims(n, d, n_s, ConstraintKind::TracePreserving).full);
  for (Index i = 0; i < e.size(); ++i) e(i) = rng.uniform_pm1();
  return LowerDiagB(n, d, n_s, std::move(e));
}

inline double gram_min_eig(const LowerDiagB& b, ConstraintKind kind) {
  const KrausSet k = b.kraus();
  return min_eigenvalue(kind == ConstraintKind::TracePreserving ? gram_tp(k) : gram_unit(k));
}

// Multipliers and effective operator for the plain and ratio objectives.
inline IterState with_lambda(const Objective& obj, IterState st, ConstraintKind kind) {
  if (!obj.q) {
    st.lambda = lagrange_multipliers(obj.s->s.matrix(), st.b, kind);
    return st;
  }
  const Matrix bm = st.b.matrix();
  const double den = (bm.transpose() * obj.q->q.matrix() * bm).trace();
  const double ratio = (bm.transpose() * obj.s->s.matrix() * bm).trace() / den;
  const Matrix t = (obj.s->s.matrix() - ratio * obj.q->q.matrix()) / den;
  st.lambda = lagrange_multipliers(t, st.b, kind);
  return st;
}

inline Matrix effective_operator(const Objective& obj, const IterState& st, ConstraintKind kind) {
  const Index n = st.b.n(), d = st.b.d();
  double w = 1.0;
  if (obj.q) {
    const Matrix bm = st.b.matrix();
    w = (bm.transpose() * obj.q->q.matrix() * bm).trace();
  }
  return obj.s->s.matrix() - w * lambda_tensor(st.lambda, n, d, kind);
}

inline LowRankResult run_impl(const Objective& obj, Index n_s, ConstraintKind kind, const LowRankConfig& cfg) {
  cfg.validate();
  const Index n = obj.s->d_in, d = obj.s->d_out;
  require(n_s >= 1 && n_s <= d * n, ErrorKind::InvalidInput, "lowrank: Kraus rank outside [1, D*n]");
  const double norm2 = static_cast<double>(kind == ConstraintKind::TracePreserving ? n : d);
  Rng rng(cfg.seed);

  LowRankResult res;
  IterState st;
  auto fresh_start = [&]() {
    for (int attempt = 0;; ++attempt) {
      IterState cand;
      cand.b = random_lower_diag(n, d, n_s, rng);
      try {
        cand = restore_and_regauge(cand, kind);
        cand.fidelity = obj.value(cand.b);
        cand = with_lambda(obj, cand, kind);
        return cand;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularGram || attempt >= cfg.max_restarts) {
          if (e.kind() == ErrorKind::SingularGram) {
            fail(ErrorKind::SingularGram, "lowrank: no nonsingular start for Kraus rank " + std::to_string(n_s) +
                                              " (the constraint may be unreachable at this rank)");
          }
          throw;
        }
      }
    }
  };
  st = fresh_start();
  IterState best = st;

  int small = 0, stagnant = 0;
  bool escape_next = false;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    LowRankConfig step_cfg = cfg;
    if (escape_next) step_cfg.eig_pick = EigPick::index_offset(1);
    const Matrix op = effective_operator(obj, st, kind);
    const Matrix qop = obj.q ? obj.q->q.matrix() : Matrix();
    std::vector<EigCandidate> cands =
        eig_candidates(op, obj.q ? &qop : nullptr, st, kind, norm2, step_cfg, 0);

    // Degenerate picks: keep the candidate whose restored fidelity is largest.
    LowRankIteration rec;
    rec.iteration = it;
    rec.eig_offset = step_cfg.eig_pick.position();
    rec.gram_min_eig = gram_min_eig(cands.front().b, kind);
    std::optional<IterState> accepted;
    double step = 0;
    bool restored_any = false;
    for (double t = 1.0; t >= 1.0 / 1024; t *= 0.5) {
      std::optional<IterState> best_t;
      for (const EigCandidate& c : cands) {
        IterState trial = st;
        trial.b = LowerDiagB(n, d, n_s, Vector((1.0 - t) * st.b.entries() + t * c.b.entries()));
        try {
          trial = restore_and_regauge(trial, kind);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::SingularGram) throw;
          continue;
        }
        restored_any = true;
        trial.fidelity = obj.value(trial.b);
        if (!best_t || trial.fidelity > best_t->fidelity) best_t = std::move(trial);
      }
      if (best_t && best_t->fidelity >= st.fidelity - 1e-12 * std::max(1.0, std::abs(st.fidelity))) {
        accepted = std::move(best_t);
        step = t;
        break;
      }
    }
    escape_next = false;

    double rel = 0;
    if (accepted) {
      rel = (accepted->fidelity - st.fidelity) / std::max(std::abs(st.fidelity), 1e-300);
      accepted->iteration = it;
      st = with_lambda(obj, std::move(*accepted), kind);
      if (st.fidelity > best.fidelity) best = st;
    } else if (!restored_any) {
      // Every trial hit a singular Gram: start over from a fresh point.
      ++res.restarts;
      if (res.restarts > cfg.max_restarts) break;
      st = fresh_start();
      st.iteration = it;
    }
    rec.fidelity = st.fidelity;
    rec.step = step;
    rec.constraint_residual = constraint_residual(kraus_to_choi(st.b.kraus()), kind);
    if (cfg.record_trace) res.trace.push_back(rec);
    res.iterations = it;

    if (accepted && std::abs(rel) < cfg.fidelity_tol) {
      ++small;
    } else {
      small = 0;
    }
    if (rel < cfg.fidelity_tol) {
      ++stagnant;
    } else {
      stagnant = 0;
    }
    if (small >= 5 && step == 1.0) {
      res.status = LowRankStatus::Converged;
      break;
    }
    if (stagnant >= cfg.stagnation_window) {
      if (res.escapes >= cfg.max_escapes) {
        res.status = LowRankStatus::Stalled;
        break;
      }
      ++res.escapes;
      escape_next = true;
      stagnant = 0;
    }
  }
  const IterState& out = res.status == LowRankStatus::Converged ? st : best;
  res.kraus = out.b.kraus();
  res.fidelity = out.fidelity;
  return res;
}

}  // namespace detail

/// Maximizes Tr(B^T S B) at Kraus rank n_s under the chosen constraint.
namespace detail {

// Start 0 uses cfg.seed itself so a single start matches a plain run.
inline LowRankResult run_starts(const Objective& obj, Index n_s, ConstraintKind kind, const LowRankConfig& cfg) {
  cfg.validate();
  LowRankResult best = run_impl(obj, n_s, kind, cfg);
  for (int k = 1; k < cfg.starts; ++k) {
    LowRankConfig c = cfg;
    c.seed = Rng(cfg.seed).split(static_cast<std::uint64_t>(k)).next_u64();
    LowRankResult r = run_impl(obj, n_s, kind, c);
    if (r.fidelity > best.fidelity) best = std::move(r);
  }
  return best;
}

}  // namespace detail

inline LowRankResult run(const FidelityTensor& s, Index n_s, ConstraintKind kind, const LowRankConfig& cfg = {}) {
  detail::Objective obj{&s, nullptr};
  return detail::run_starts(obj, n_s, kind, cfg);
}

/// Maximizes Tr(B^T S B) / Tr(B^T Q B). The returned operators satisfy the
/// constraint exactly (Gram = I); fidelity holds the ratio.
inline LowRankResult run_ratio(const FidelityTensor& s, const DenominatorTensor& q, Index n_s,
                               const LowRankConfig& cfg = {},
                               ConstraintKind kind = ConstraintKind::UnitPreserving) {
  require(q.d_in == s.d_in && q.d_out == s.d_out, ErrorKind::DimensionMismatch, "run_ratio: S and Q dimensions differ");
  detail::Objective obj{&s, &q};
  return detail::run_starts(obj, n_s, kind, cfg);
}

}  // namespace choiforge
