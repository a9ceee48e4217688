#include <gtest/gtest.h>

#include <cmath>

#include "choiforge/datagen.hpp"
#include "choiforge/lowrank.hpp"
#include "choiforge/sdp.hpp"
#include "support.hpp"

using namespace choiforge;

namespace {

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double sign_free(const Matrix& a, const Matrix& b) {
  return std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
}

// Count of (row, column) cells with column <= row in a Dn x N_s grid.
Index stencil_count(Index rows, Index n_s) {
  Index c = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index s = 0; s < n_s; ++s) c += s <= i;
  return c;
}

LowerDiagB random_b(Index n, Index d, Index n_s, Rng& rng) {
  Matrix b = testgen::matrix(d * n, n_s, rng);
  for (Index i = 0; i < b.rows(); ++i)
    for (Index s = i + 1; s < n_s; ++s) b(i, s) = 0;
  return pack(b, n, d);
}

// Gram of the chosen constraint between two stacked B matrices.
Matrix gram_between(const Matrix& a, const Matrix& b, Index n, Index d, ConstraintKind kind) {
  const bool tp = kind == ConstraintKind::TracePreserving;
  const Index m = tp ? n : d;
  Matrix g = Matrix::Zero(m, m);
  for (Index s = 0; s < a.cols(); ++s)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index q = 0; q < (tp ? n : d); ++q) {
          if (tp) {
            g(k, q) += a(j * n + k, s) * b(j * n + q, s);
          } else {
            g(j, q) += a(j * n + k, s) * b(q * n + k, s);
          }
        }
  return g;
}

IterState state_of(const LowerDiagB& b, Index m) {
  IterState st;
  st.b = b;
  st.lambda = SymMatrix(Matrix(Matrix::Zero(m, m)));
  return st;
}

}  // namespace

// ---------------------------------------------------------------------------
// pattern and packing

TEST(Dims, MatchesStencilEnumeration) {
  for (Index n = 1; n <= 5; ++n)
    for (Index d = 1; d <= 5; ++d)
      for (Index n_s = 1; n_s <= d * n; ++n_s) {
        const LowRankDims tp = dims(n, d, n_s, ConstraintKind::TracePreserving);
        const LowRankDims un = dims(n, d, n_s, ConstraintKind::UnitPreserving);
        EXPECT_EQ(tp.full, stencil_count(d * n, n_s));
        EXPECT_EQ(un.full, tp.full);
        EXPECT_EQ(tp.full - tp.reduced, n * (n + 1) / 2 - 1);
        EXPECT_EQ(un.full - un.reduced, d * (d + 1) / 2 - 1);
      }
}

TEST(Dims, RejectsRankOutsideRange) {
  expect_error(ErrorKind::InvalidInput, [] { dims(2, 2, 0, ConstraintKind::TracePreserving); });
  expect_error(ErrorKind::InvalidInput, [] { dims(2, 2, 5, ConstraintKind::TracePreserving); });
}

TEST(Pack, RoundTripAndOffsets) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(seed % 3), d = 1 + static_cast<Index>((seed / 3) % 3);
    const Index n_s = 1 + static_cast<Index>(seed % static_cast<std::uint64_t>(d * n));
    const LowerDiagB b = random_b(n, d, n_s, rng);
    EXPECT_EQ(pack(unpack(b), n, d).entries(), b.entries());
    for (Index i = 0; i < d * n; ++i) {
      EXPECT_EQ(LowerDiagB::row_offset(i + 1, n_s), LowerDiagB::row_offset(i, n_s) + LowerDiagB::row_length(i, n_s));
    }
    EXPECT_EQ(LowerDiagB::row_offset(d * n, n_s), b.entries().size());
  }
}

TEST(Pack, EntryAboveDiagonalRejected) {
  Matrix b = Matrix::Ones(4, 2);
  expect_error(ErrorKind::InvalidInput, [&] { pack(b, 2, 2); });
  b(0, 1) = 1e-14;
  EXPECT_NO_THROW(pack(b, 2, 2, 1e-12));
  expect_error(ErrorKind::DimensionMismatch, [] { LowerDiagB(2, 2, 2, Vector::Zero(3)); });
}

// ---------------------------------------------------------------------------
// helper constraints and gauge

TEST(Helpers, Counts) {
  Rng rng(2);
  for (Index n = 1; n <= 4; ++n)
    for (Index d = 1; d <= 4; ++d) {
      const LowerDiagB b = random_b(n, d, std::min<Index>(2, d * n), rng);
      EXPECT_EQ(static_cast<Index>(helper_constraints(b, ConstraintKind::TracePreserving).size()), n * (n + 1) / 2 - 1);
      EXPECT_EQ(static_cast<Index>(helper_constraints(b, ConstraintKind::UnitPreserving).size()), d * (d + 1) / 2 - 1);
    }
  EXPECT_TRUE(helper_constraints(random_b(3, 1, 1, rng), ConstraintKind::UnitPreserving).empty());
}

TEST(Helpers, InnerProductsAreGramDifferences) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Rng rng(seed);
    const Index n = 2 + static_cast<Index>(seed % 2), d = 2 + static_cast<Index>((seed / 2) % 2), n_s = 2;
    for (ConstraintKind kind : {ConstraintKind::TracePreserving, ConstraintKind::UnitPreserving}) {
      const LowerDiagB b = random_b(n, d, n_s, rng), x = random_b(n, d, n_s, rng);
      const Matrix g = gram_between(b.matrix(), x.matrix(), n, d, kind);
      const Matrix sym = g + g.transpose();
      const auto cs = helper_constraints(b, kind);
      const Index m = g.rows();
      std::size_t idx = 0;
      for (Index a = 0; a < m; ++a)
        for (Index a2 = a + 1; a2 < m; ++a2) EXPECT_NEAR(cs[idx++].dot(x.entries()), sym(a, a2), 1e-12);
      for (Index a = 1; a < m; ++a) EXPECT_NEAR(cs[idx++].dot(x.entries()), g(a, a) - g(a - 1, a - 1), 1e-12);
    }
  }
}

TEST(Helpers, FeasibleIterateIsOrthogonal) {
  Rng rng(4);
  IterState st = state_of(random_b(3, 2, 3, rng), 3);
  st = restore_and_regauge(st, ConstraintKind::TracePreserving);
  for (const Vector& c : helper_constraints(st.b, ConstraintKind::TracePreserving))
    EXPECT_NEAR(c.dot(st.b.entries()), 0.0, 1e-12);
}

TEST(Regauge, ChoiInvariantAndLowerDiagonal) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(seed % 4), d = 1 + static_cast<Index>((seed / 4) % 4);
    const Index n_s = 1 + static_cast<Index>(seed % static_cast<std::uint64_t>(d * n));
    const Matrix b = testgen::matrix(d * n, n_s, rng) * random_orthogonal(n_s, rng);
    const LowerDiagB g = detail::regauge(b, n, d);
    const Matrix j0 = b * b.transpose(), j1 = g.matrix() * g.matrix().transpose();
    EXPECT_LE((j0 - j1).cwiseAbs().maxCoeff(), 1e-10) << seed;
  }
}

TEST(Restore, SatisfiesConstraint) {
  for (ConstraintKind kind : {ConstraintKind::TracePreserving, ConstraintKind::UnitPreserving}) {
    Rng rng(6);
    IterState st = state_of(random_b(3, 3, 4, rng), 3);
    st = restore_and_regauge(st, kind);
    EXPECT_LE(constraint_residual(kraus_to_choi(st.b.kraus()), kind), 1e-12);
  }
  Rng rng(7);
  // One Kraus operator with D < n cannot be trace preserving.
  expect_error(ErrorKind::SingularGram,
               [&] { restore_and_regauge(state_of(random_b(3, 1, 1, rng), 3), ConstraintKind::TracePreserving); });
}

// ---------------------------------------------------------------------------
// multipliers and single steps

TEST(Lambda, MatchesIndexContraction) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Rng rng(seed);
    const Index n = 2, d = 3, n_s = 2;
    const FidelityTensor s = random_s_matrix(n, d, rng);
    const LowerDiagB b = random_b(n, d, n_s, rng);
    const Matrix bm = b.matrix(), sb = s.s.matrix() * bm;
    for (ConstraintKind kind : {ConstraintKind::TracePreserving, ConstraintKind::UnitPreserving}) {
      const Matrix g = gram_between(bm, sb, n, d, kind);
      const Matrix expect = 0.5 * (g + g.transpose());
      EXPECT_LE((lagrange_multipliers(s.s.matrix(), b, kind).matrix() - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  Rng rng(1);
  const FidelityTensor s = random_s_matrix(2, 2, rng);
  const LowerDiagB zero(2, 2, 2, Vector::Zero(dims(2, 2, 2, ConstraintKind::TracePreserving).full));
  EXPECT_EQ(lagrange_multipliers(s.s.matrix(), zero, ConstraintKind::TracePreserving).matrix(), Matrix::Zero(2, 2));
}

TEST(EigStep, NoHelpersGivesTopEigenvector) {
  // D = 1 with the unit constraint has no helper rows, so with lambda = 0 the
  // step is the top eigenvector of S itself.
  Rng rng(3);
  const FidelityTensor s = random_s_matrix(4, 1, rng);
  const IterState st = state_of(random_b(4, 1, 1, rng), 1);
  const IterState out = eig_step(s, st, ConstraintKind::UnitPreserving);
  const EigDecomposition e = sym_eig(s.s);
  const Vector top = e.vectors.col(3);
  EXPECT_NEAR(out.b.entries().norm(), 1.0, 1e-12);
  EXPECT_LE(sign_free(out.b.entries(), top), 1e-10);
}

TEST(EigStep, UnitaryIsFixedPoint) {
  Rng rng(8);
  const Matrix u = random_orthogonal(3, rng);
  const FidelityTensor s = build_s(unitary_dynamics_sample(u, std::nullopt, 100, rng));
  IterState st = state_of(pack(KrausSet::single(u).stacked(), 3, 3), 3);
  st = lagrange_update(s, st, ConstraintKind::TracePreserving);
  // Stationarity: S B = (delta x lambda) B.
  const Matrix r = s.s.matrix() * st.b.matrix() -
                   kron(Matrix::Identity(3, 3), st.lambda.matrix()) * st.b.matrix();
  EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-10);
  const IterState next = restore_and_regauge(eig_step(s, st, ConstraintKind::TracePreserving), ConstraintKind::TracePreserving);
  EXPECT_LE(sign_free(next.b.matrix(), st.b.matrix()), 1e-8);
}

// ---------------------------------------------------------------------------
// driver

TEST(Run, FidelityNeverDecreasesAlongTrace) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Rng rng(seed);
    const Index n = 2 + static_cast<Index>(seed % 2), d = 2;
    const FidelityTensor s = random_s_matrix(n, d, rng);
    LowRankConfig cfg;
    cfg.seed = seed;
    cfg.record_trace = true;
    const LowRankResult r = run(s, 2, ConstraintKind::TracePreserving, cfg);
    ASSERT_FALSE(r.trace.empty());
    if (r.restarts) continue;
    for (std::size_t i = 1; i < r.trace.size(); ++i)
      EXPECT_GE(r.trace[i].fidelity, r.trace[i - 1].fidelity - 1e-12 * std::max(1.0, std::abs(r.trace[i - 1].fidelity)));
    for (const LowRankIteration& it : r.trace) EXPECT_LE(it.constraint_residual, 1e-10);
  }
}

TEST(Run, RecoversUnitary) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    const Index n = 2 + static_cast<Index>(seed);
    const Matrix u = random_orthogonal(n, rng);
    const MappingSample sample = unitary_dynamics_sample(u, std::nullopt, 200, rng);
    LowRankConfig cfg;
    cfg.seed = seed;
    cfg.starts = 16;
    const LowRankResult r = run(build_s(sample), 1, ConstraintKind::TracePreserving, cfg);
    EXPECT_LE(rel(r.fidelity, sample.total_omega()), 1e-8) << seed;
    EXPECT_LE(sign_free(r.kraus.op(0), u), 1e-6) << seed;
  }
}

TEST(Run, RecoversToyChannel) {
  Rng rng(11);
  const KrausSet ch = toy_channel(2, 3, rng);
  const MappingSample sample = channel_maxeig_sample(ch, 200, rng).sample;
  LowRankConfig cfg;
  cfg.starts = 8;
  const LowRankResult r = run(build_s(sample), 1, ConstraintKind::TracePreserving, cfg);
  EXPECT_LE((kraus_to_choi(r.kraus).j().matrix() - kraus_to_choi(ch).j().matrix()).norm(), 1e-6);
}

TEST(RunRatio, RecoversProjector) {
  Rng rng(12);
  const ProjectiveSample ps = projective_sample(4, 2, 200, rng);
  LowRankConfig cfg;
  cfg.starts = 8;
  const LowRankResult r = run_ratio(build_s(ps.sample), build_q(ps.sample), 1, cfg);
  EXPECT_NEAR(r.fidelity, 1.0, 1e-8);
  EXPECT_LE(sign_free(r.kraus.op(0), ps.p), 1e-6);
}

TEST(RunRatio, ScalarDenominatorReducesToPlainRun) {
  Rng rng(13);
  const Index n = 2, d = 3;
  const FidelityTensor s = random_s_matrix(n, d, rng);
  const double c = 2.5;
  const DenominatorTensor q(d, n, SymMatrix(Matrix(c * Matrix::Identity(d * n, d * n))));
  LowRankConfig cfg;
  cfg.seed = 5;
  cfg.starts = 4;
  const LowRankResult plain = run(s, 2, ConstraintKind::UnitPreserving, cfg);
  const LowRankResult ratio = run_ratio(s, q, 2, cfg);
  // |B|^2 = D under the unit constraint.
  EXPECT_LE(rel(ratio.fidelity * c * d, plain.fidelity), 1e-8);
}

TEST(Run, FullRankAgreesWithSdp) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Rng rng(seed);
    const Index n = 2, d = 2 + static_cast<Index>(seed % 2);
    const FidelityTensor s = random_s_matrix(n, d, rng);
    const SdpSolution sol = solve(SdpProblem(s, build_constraints(n, d, ConstraintKind::TracePreserving)));
    ASSERT_EQ(sol.status, SdpStatus::Optimal);
    LowRankConfig cfg;
    cfg.seed = seed;
    const LowRankResult r = run(s, d * n, ConstraintKind::TracePreserving, cfg);
    EXPECT_LE(std::abs(r.fidelity - sol.objective) / std::max(1.0, std::abs(sol.objective)), 1e-5) << seed;
  }
}

TEST(Run, RankOneStationarity) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const Index n = 2 + static_cast<Index>(seed % 2), d = 3;
    const FidelityTensor s = random_s_matrix(n, d, rng);
    LowRankConfig cfg;
    cfg.seed = seed;
    cfg.fidelity_tol = 1e-14;
    const LowRankResult r = run(s, 1, ConstraintKind::TracePreserving, cfg);
    const LowerDiagB b = pack(r.kraus.stacked(), n, d);
    const SymMatrix lam = lagrange_multipliers(s.s.matrix(), b, ConstraintKind::TracePreserving);
    const Matrix res = s.s.matrix() * b.matrix() - kron(Matrix::Identity(d, d), lam.matrix()) * b.matrix();
    EXPECT_LE(res.cwiseAbs().maxCoeff(), 1e-7) << seed << " " << to_string(r.status);
  }
}

TEST(Run, ConfigAndRankErrors) {
  Rng rng(1);
  const FidelityTensor s = random_s_matrix(2, 2, rng);
  LowRankConfig bad;
  bad.starts = 0;
  expect_error(ErrorKind::InvalidInput, [&] { run(s, 1, ConstraintKind::TracePreserving, bad); });
  expect_error(ErrorKind::InvalidInput, [&] { run(s, 5, ConstraintKind::TracePreserving); });
  // Rank one from R^3 into R^1 can never be trace preserving.
  const FidelityTensor s31 = random_s_matrix(3, 1, rng);
  expect_error(ErrorKind::SingularGram, [&] { run(s31, 1, ConstraintKind::TracePreserving); });
}
