#pragma once

// The reconstruction and rank experiments, one function per sweep point, and
// a small worker pool that runs points in parallel while keeping row order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "choiforge/channel.hpp"
#include "choiforge/datagen.hpp"
#include "choiforge/error.hpp"
#include "choiforge/fidelity.hpp"
#include "choiforge/io.hpp"
#include "choiforge/lowrank.hpp"
#include "choiforge/rng.hpp"
#include "choiforge/sdp.hpp"

namespace choiforge {

enum class SolverChoice { Sdp, LowRank, Both };

inline const char* to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::Sdp: return "sdp";
    case SolverChoice::LowRank: return "lowrank";
    case SolverChoice::Both: return "both";
  }
  return "unknown";
}

/// Random starts for the fixed-rank iteration when N_s < Dn. Single starts
/// stop at a non-global stationary point on roughly half of the small
/// unitary instances; 16 starts recovered all of them.
inline constexpr int kLowRankStarts = 32;

/// Largest Dn the interior-point solver accepts without an explicit opt-in.
inline constexpr Index kDeskLimit = 400;

/// Solver settings for experiments whose answer is an exact operator. The
/// recovered operator's error scales like the square root of the final gap
/// divided by the dual slack's smallest nonzero eigenvalue, which can be
/// small for trajectory samples; a 1e-8 gap is not enough there.
inline SolverConfig reconstruction_config() {
  SolverConfig cfg;
  cfg.tol_gap = 1e-12;
  cfg.tol_feas = 1e-12;
  cfg.extended_precision = true;
  return cfg;
}

struct SweepRow {
  std::string experiment;
  Index n = 0;
  Index d = 0;
  Index n_s_effective = 0;
  Index rank_j = 0;
  double fidelity = 0;
  std::optional<double> fidelity_over_sum_omega;
  std::optional<double> f_init;
  std::optional<double> recovery_error;
  std::string solver;
  std::string status;
  std::string check = "-";  // pass / fail when the experiment has an expected outcome
  std::uint64_t seed = 0;
  double wall_ms = 0;

  // Kept in memory for artifact export and cross-checks; not part of the CSV.
  std::optional<ChoiMatrix> choi;
  std::optional<FidelityTensor> s;
  std::optional<SdpProblem> problem;
  std::optional<SdpSolution> solution;
  std::optional<ConstraintKind> kind;
  std::vector<IterationRecord> sdp_trace;
  std::vector<LowRankIteration> lowrank_trace;
};

struct ExperimentOptions {
  std::uint64_t seed = 0;
  std::optional<Index> m;  // sample size; default_sample_size when absent
  SolverChoice solver = SolverChoice::Sdp;
  std::optional<Index> n_s;  // lowrank Kraus rank
  ConstraintKind kind = ConstraintKind::TracePreserving;
  SolverConfig sdp;
  LowRankConfig lowrank;
  std::optional<int> lowrank_starts;  // default: kLowRankStarts below full rank, else 1
  bool allow_large = false;
  bool record_trace = false;
};

namespace detail {

// Every point draws from its own substream so adding points to a sweep does
// not change the others.
inline Rng point_rng(std::uint64_t seed, Index n, Index d) {
  return Rng(seed).split(static_cast<std::uint64_t>(n) * 100003ULL + static_cast<std::uint64_t>(d));
}

inline void guard_size(Index n, Index d, const ExperimentOptions& opt) {
  if (d * n > kDeskLimit && !opt.allow_large) {
    fail(ErrorKind::InvalidInput, "D*n = " + std::to_string(d * n) + " exceeds " + std::to_string(kDeskLimit) +
                                      "; pass --allow-large to run it anyway");
  }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline double sign_free_error(const Matrix& a, const Matrix& b) {
  return std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
}

inline SweepRow sdp_row(const std::string& experiment, const SdpProblem& p, const ExperimentOptions& opt,
                        const SolverConfig& cfg, std::optional<double> sum_omega) {
  SweepRow row;
  row.experiment = experiment;
  row.n = p.objective().d_in;
  row.d = p.objective().d_out;
  row.solver = "sdp";
  row.seed = opt.seed;
  const auto t0 = std::chrono::steady_clock::now();
  SolverConfig c = cfg;
  c.record_trace = opt.record_trace;
  SdpSolution sol = solve(p, c);
  row.wall_ms = elapsed_ms(t0);
  row.status = to_string(sol.status);
  row.fidelity = sol.objective;
  row.rank_j = numerical_rank(sol.j);
  row.n_s_effective = row.rank_j;  // Kraus operators kept after the rank cut
  if (sum_omega && *sum_omega > 0) row.fidelity_over_sum_omega = sol.objective / *sum_omega;
  row.choi = sol.j;
  row.s = p.objective();
  row.problem = p;
  row.sdp_trace = sol.trace;
  row.solution = std::move(sol);
  return row;
}

inline SweepRow lowrank_row(const std::string& experiment, const FidelityTensor& s, Index n_s, ConstraintKind kind,
                            const ExperimentOptions& opt, std::optional<double> sum_omega) {
  SweepRow row;
  row.experiment = experiment;
  row.n = s.d_in;
  row.d = s.d_out;
  row.solver = "lowrank";
  row.seed = opt.seed;
  const auto t0 = std::chrono::steady_clock::now();
  LowRankConfig cfg = opt.lowrank;
  cfg.seed = opt.seed;
  cfg.record_trace = opt.record_trace;
  cfg.starts = opt.lowrank_starts.value_or(n_s < s.dim() ? kLowRankStarts : 1);
  LowRankResult r = run(s, n_s, kind, cfg);
  row.wall_ms = elapsed_ms(t0);
  row.status = to_string(r.status);
  row.fidelity = r.fidelity;
  row.choi = kraus_to_choi(r.kraus);
  row.rank_j = numerical_rank(*row.choi);
  row.n_s_effective = n_s;
  if (sum_omega && *sum_omega > 0) row.fidelity_over_sum_omega = r.fidelity / *sum_omega;
  row.s = s;
  row.kind = kind;
  row.lowrank_trace = std::move(r.trace);
  return row;
}

inline void set_check(SweepRow& row, bool ok) { row.check = ok ? "pass" : "fail"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// experiments

/// Unitary learning on a trajectory sample (n = D). Expected: rank 1,
/// F / sum omega = 1 and the generator recovered up to sign.
inline std::vector<SweepRow> unitary_point(Index n, const ExperimentOptions& opt) {
  detail::guard_size(n, n, opt);
  Rng rng = detail::point_rng(opt.seed, n, n);
  const Matrix u = random_rotation(n, rng);
  const MappingSample sample = unitary_dynamics_sample(u, std::nullopt, opt.m.value_or(default_sample_size(n, n)), rng);
  const FidelityTensor s = build_s(sample);
  const double sum_omega = sample.total_omega();
  std::vector<SweepRow> rows;
  auto finish = [&](SweepRow& row) {
    const KrausSet k = choi_to_kraus(*row.choi);
    row.recovery_error = detail::sign_free_error(k.op(0), u);
    detail::set_check(row, row.rank_j == 1 && std::abs(*row.fidelity_over_sum_omega - 1.0) <= 1e-6 &&
                               *row.recovery_error <= 1e-6);
  };
  if (opt.solver != SolverChoice::LowRank) {
    SweepRow row = detail::sdp_row("unitary", SdpProblem(s, build_constraints(n, n, ConstraintKind::TracePreserving)),
                                   opt, reconstruction_config(), sum_omega);
    finish(row);
    row.kind = ConstraintKind::TracePreserving;
    rows.push_back(std::move(row));
  }
  if (opt.solver != SolverChoice::Sdp) {
    SweepRow row = detail::lowrank_row("unitary", s, opt.n_s.value_or(1), ConstraintKind::TracePreserving, opt, sum_omega);
    finish(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Random unit pairs psi -> phi. Expected: rank <= max(D, n); for D = 1 the
/// fidelity is exact (ratio 1) with rank n.
inline std::vector<SweepRow> random_sample_point(Index n, Index d, const ExperimentOptions& opt) {
  detail::guard_size(n, d, opt);
  Rng rng = detail::point_rng(opt.seed, n, d);
  const MappingSample sample = random_pair_sample(n, d, opt.m.value_or(default_sample_size(n, d)), rng);
  const FidelityTensor s = build_s(sample);
  const double sum_omega = sample.total_omega();
  std::vector<SweepRow> rows;
  auto check = [&](SweepRow& row) {
    if (d == 1) {
      detail::set_check(row, row.rank_j == n && std::abs(*row.fidelity_over_sum_omega - 1.0) <= 1e-8);
    } else {
      detail::set_check(row, row.rank_j <= std::max(n, d));
    }
  };
  if (opt.solver != SolverChoice::LowRank) {
    SweepRow row = detail::sdp_row("random-sample", SdpProblem(s, build_constraints(n, d, opt.kind)), opt, opt.sdp, sum_omega);
    row.kind = opt.kind;
    check(row);
    rows.push_back(std::move(row));
  }
  if (opt.solver != SolverChoice::Sdp) {
    SweepRow row = detail::lowrank_row("random-sample", s, opt.n_s.value_or(d * n), opt.kind, opt, sum_omega);
    check(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Random symmetric S with no sample behind it. Expected: rank <= max(D, n).
inline std::vector<SweepRow> random_matrix_point(Index n, Index d, const ExperimentOptions& opt) {
  detail::guard_size(n, d, opt);
  Rng rng = detail::point_rng(opt.seed, n, d);
  const FidelityTensor s = random_s_matrix(n, d, rng);
  std::vector<SweepRow> rows;
  if (opt.solver != SolverChoice::LowRank) {
    SweepRow row = detail::sdp_row("random-matrix", SdpProblem(s, build_constraints(n, d, opt.kind)), opt, opt.sdp, std::nullopt);
    row.kind = opt.kind;
    detail::set_check(row, row.rank_j <= std::max(n, d));
    rows.push_back(std::move(row));
  }
  if (opt.solver != SolverChoice::Sdp) {
    SweepRow row = detail::lowrank_row("random-matrix", s, opt.n_s.value_or(d * n), opt.kind, opt, std::nullopt);
    detail::set_check(row, row.rank_j <= std::max(n, d));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Sample generated by a full-rank random TP channel, outputs replaced by
/// the top eigenvector of the produced state. Expected: F >= F_init.
inline std::vector<SweepRow> channel_point(Index n, Index d, const ExperimentOptions& opt) {
  detail::guard_size(n, d, opt);
  Rng rng = detail::point_rng(opt.seed, n, d);
  const KrausSet ch = random_tp_channel(n, d, d * n, rng);
  const ChannelSample cs = channel_maxeig_sample(ch, opt.m.value_or(default_sample_size(n, d)), rng);
  const FidelityTensor s = build_s(cs.sample);
  const double sum_omega = cs.sample.total_omega();
  std::vector<SweepRow> rows;
  auto check = [&](SweepRow& row) {
    row.f_init = cs.f_init;
    detail::set_check(row, row.fidelity >= cs.f_init - 1e-8 * std::max(1.0, std::abs(cs.f_init)));
  };
  if (opt.solver != SolverChoice::LowRank) {
    SweepRow row = detail::sdp_row("channel", SdpProblem(s, build_constraints(n, d, ConstraintKind::TracePreserving)),
                                   opt, opt.sdp, sum_omega);
    row.kind = ConstraintKind::TracePreserving;
    check(row);
    rows.push_back(std::move(row));
  }
  if (opt.solver != SolverChoice::Sdp) {
    SweepRow row =
        detail::lowrank_row("channel", s, opt.n_s.value_or(d * n), ConstraintKind::TracePreserving, opt, sum_omega);
    check(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Rank-one TP channel with D > n. Expected: recovered exactly.
inline std::vector<SweepRow> toy_channel_point(Index n, Index d, const ExperimentOptions& opt) {
  detail::guard_size(n, d, opt);
  Rng rng = detail::point_rng(opt.seed, n, d);
  const KrausSet ch = toy_channel(n, d, rng);
  const ChannelSample cs = channel_maxeig_sample(ch, opt.m.value_or(default_sample_size(n, d)), rng);
  const FidelityTensor s = build_s(cs.sample);
  const double sum_omega = cs.sample.total_omega();
  const ChoiMatrix truth = kraus_to_choi(ch);
  std::vector<SweepRow> rows;
  auto check = [&](SweepRow& row) {
    row.f_init = cs.f_init;
    row.recovery_error = (row.choi->matrix() - truth.matrix()).norm();
    detail::set_check(row, *row.recovery_error <= 1e-6);
  };
  if (opt.solver != SolverChoice::LowRank) {
    SweepRow row = detail::sdp_row("toy-channel", SdpProblem(s, build_constraints(n, d, ConstraintKind::TracePreserving)),
                                   opt, reconstruction_config(), sum_omega);
    row.kind = ConstraintKind::TracePreserving;
    check(row);
    rows.push_back(std::move(row));
  }
  if (opt.solver != SolverChoice::Sdp) {
    SweepRow row = detail::lowrank_row("toy-channel", s, opt.n_s.value_or(1), ConstraintKind::TracePreserving, opt, sum_omega);
    check(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Projective operator P (D <= n) from normalized projections. The SDP uses
/// the projective constraint set; the fidelity column holds the ratio
/// fidelity of the recovered operator. Expected: rank 1, P up to sign,
/// ratio 1.
inline std::vector<SweepRow> projective_point(Index n, Index d, const ExperimentOptions& opt) {
  detail::guard_size(n, d, opt);
  Rng rng = detail::point_rng(opt.seed, n, d);
  const ProjectiveSample ps = projective_sample(n, d, opt.m.value_or(default_sample_size(n, d)), rng);
  const FidelityTensor s = build_s(ps.sample);
  const DenominatorTensor q = build_q(ps.sample);
  std::vector<SweepRow> rows;
  auto finish = [&](SweepRow& row) {
    KrausSet k = choi_to_kraus(*row.choi);
    // Scale the top operator to orthonormal rows before comparing with P.
    const KrausSet top = adjust_unit(KrausSet::single(k.op(0)), 1e-10);
    row.recovery_error = detail::sign_free_error(top.op(0), ps.p);
    row.fidelity = fidelity_ratio(k, s, q);
    row.fidelity_over_sum_omega = row.fidelity;
    detail::set_check(row, row.rank_j == 1 && *row.recovery_error <= 1e-6 && std::abs(row.fidelity - 1.0) <= 1e-8);
  };
  if (opt.solver != SolverChoice::LowRank) {
    SdpProblem p(s, build_projective_constraints(n, d, q));
    SweepRow row = detail::sdp_row("projective", p, opt, reconstruction_config(), std::nullopt);
    row.kind = ConstraintKind::UnitPreserving;
    finish(row);
    rows.push_back(std::move(row));
  }
  if (opt.solver != SolverChoice::Sdp) {
    SweepRow row;
    row.experiment = "projective";
    row.n = n;
    row.d = d;
    row.solver = "lowrank";
    row.seed = opt.seed;
    const auto t0 = std::chrono::steady_clock::now();
    LowRankConfig cfg = opt.lowrank;
    cfg.seed = opt.seed;
    cfg.record_trace = opt.record_trace;
    const Index n_s = opt.n_s.value_or(1);
    cfg.starts = opt.lowrank_starts.value_or(n_s < d * n ? kLowRankStarts : 1);
    LowRankResult r = run_ratio(s, q, n_s, cfg);
    row.wall_ms = detail::elapsed_ms(t0);
    row.status = to_string(r.status);
    row.choi = kraus_to_choi(r.kraus);
    row.rank_j = numerical_rank(*row.choi);
    row.n_s_effective = n_s;
    row.s = s;
    row.kind = ConstraintKind::UnitPreserving;
    row.lowrank_trace = std::move(r.trace);
    finish(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// sweeps

struct SweepPoint {
  Index n = 0;
  Index d = 0;
};

/// Runs fn on every point with up to `jobs` threads. Rows come back in point
/// order; a point that throws yields one row with status "error: ...".
inline std::vector<SweepRow> run_sweep(const std::string& experiment, const std::vector<SweepPoint>& points,
                                       const std::function<std::vector<SweepRow>(const SweepPoint&)>& fn,
                                       unsigned jobs, std::uint64_t seed) {
  std::vector<std::vector<SweepRow>> results(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        results[i] = fn(points[i]);
      } catch (const std::exception& e) {
        SweepRow row;
        row.experiment = experiment;
        row.n = points[i].n;
        row.d = points[i].d;
        row.seed = seed;
        row.solver = "-";
        row.status = std::string("error: ") + e.what();
        row.check = "fail";
        results[i] = {row};
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  std::vector<SweepRow> rows;
  for (auto& r : results)
    for (auto& row : r) rows.push_back(std::move(row));
  return rows;
}

/// Thrown errors and solver breakdowns; an unmet expectation is not hard.
inline bool row_failed_hard(const SweepRow& row) {
  return row.status.rfind("error", 0) == 0 || row.status == to_string(SdpStatus::NumericalFailure) ||
         row.status == to_string(SdpStatus::Infeasible);
}

/// Sweep CSV, schema version 1. wall_ms is written as 0 unless timing is
/// requested, so that identical runs produce identical files.
inline std::string sweep_csv(const std::vector<SweepRow>& rows, bool timing = false) {
  std::string out =
      "# choiforge-sweep v1\n"
      "experiment,n,d,n_s_effective,rank_j,fidelity,fidelity_over_sum_omega,f_init,recovery_error,solver,status,check,"
      "seed,wall_ms\n";
  auto opt = [](const std::optional<double>& v) { return v ? io::fmt(*v) : std::string(); };
  for (const SweepRow& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += r.experiment + "," + std::to_string(r.n) + "," + std::to_string(r.d) + "," +
           std::to_string(r.n_s_effective) + "," + std::to_string(r.rank_j) + "," + io::fmt(r.fidelity) + "," +
           opt(r.fidelity_over_sum_omega) + "," + opt(r.f_init) + "," + opt(r.recovery_error) + "," + r.solver + "," +
           status + "," + r.check + "," + std::to_string(r.seed) + "," + (timing ? io::fmt(r.wall_ms) : "0") + "\n";
  }
  return out;
}

}  // namespace choiforge
