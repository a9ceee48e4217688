// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "choiforge/choiforge.hpp"
#include "support.hpp"

using namespace choiforge;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// SDP solutions produced by criteria 1-7, certified in criterion 9.
std::vector<SweepRow> g_sdp_rows;

void keep_sdp(const std::vector<SweepRow>& rows) {
  for (const SweepRow& r : rows)
    if (r.solver == "sdp") g_sdp_rows.push_back(r);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome unitary_reconstruction() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_ratio = 0, worst_err = 0;
  int count = 0;
  for (Index n = 2; n <= 6; ++n)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ExperimentOptions opt;
      opt.seed = seed;
      const auto rows = unitary_point(n, opt);
      keep_sdp(rows);
      const SweepRow& r = rows.at(0);
      const double dev = std::abs(*r.fidelity_over_sum_omega - 1.0);
      worst_ratio = std::max(worst_ratio, dev);
      worst_err = std::max(worst_err, *r.recovery_error);
      ++count;
      if (r.rank_j != 1 || dev > 1e-6 || *r.recovery_error > 1e-6) {
        o.pass = false;
        o.detail += " [n=" + std::to_string(n) + " seed=" + std::to_string(seed) + " rank=" + std::to_string(r.rank_j) +
                    " status=" + r.status + "]";
      }
    }
  const double secs = seconds_since(t0);
  if (secs > 60) o.pass = false;
  o.detail = std::to_string(count) + " instances, max |F/sum w - 1| " + num(worst_ratio) + ", max U error " +
             num(worst_err) + ", " + num(secs) + " s" + o.detail;
  return o;
}

Outcome toy_channel_recovery() {
  Outcome o;
  double worst = 0;
  const std::pair<Index, Index> dims_list[] = {{2, 3}, {2, 4}, {3, 5}};
  for (auto [n, d] : dims_list) {
    ExperimentOptions opt;
    opt.seed = 1;
    opt.solver = SolverChoice::Both;
    opt.n_s = 1;
    const auto rows = toy_channel_point(n, d, opt);
    keep_sdp(rows);
    if (rows.size() != 2) o.pass = false;
    for (const SweepRow& r : rows) {
      worst = std::max(worst, *r.recovery_error);
      if (*r.recovery_error > 1e-6) {
        o.pass = false;
        o.detail += " [" + std::to_string(n) + "x" + std::to_string(d) + " " + r.solver + " " + num(*r.recovery_error) + "]";
      }
    }
  }
  o.detail = "sdp and lowrank(N_s=1), max Choi error " + num(worst) + o.detail;
  return o;
}

Outcome projective_recovery() {
  Outcome o;
  double worst_err = 0, worst_ratio = 0;
  const std::pair<Index, Index> dims_list[] = {{3, 2}, {4, 2}, {5, 3}};
  for (auto [n, d] : dims_list) {
    ExperimentOptions opt;
    opt.seed = 1;
    const auto rows = projective_point(n, d, opt);
    keep_sdp(rows);
    const SweepRow& r = rows.at(0);
    worst_err = std::max(worst_err, *r.recovery_error);
    worst_ratio = std::max(worst_ratio, std::abs(r.fidelity - 1.0));
    if (r.rank_j != 1 || *r.recovery_error > 1e-6 || std::abs(r.fidelity - 1.0) > 1e-8) {
      o.pass = false;
      o.detail += " [n=" + std::to_string(n) + " D=" + std::to_string(d) + " rank=" + std::to_string(r.rank_j) + "]";
    }
  }
  o.detail = "max P error " + num(worst_err) + ", max |ratio - 1| " + num(worst_ratio) + o.detail;
  return o;
}

Outcome trace_channel_limit() {
  Outcome o;
  double worst = 0;
  for (Index n : {3, 5, 8}) {
    ExperimentOptions opt;
    opt.seed = 1;
    const auto rows = random_sample_point(n, 1, opt);
    keep_sdp(rows);
    const SweepRow& r = rows.at(0);
    const double dev = std::abs(*r.fidelity_over_sum_omega - 1.0);
    worst = std::max(worst, dev);
    if (r.rank_j != n || dev > 1e-8) {
      o.pass = false;
      o.detail += " [n=" + std::to_string(n) + " rank=" + std::to_string(r.rank_j) + " dev=" + num(dev) + "]";
    }
  }
  o.detail = "D=1, n in {3,5,8}: max |F/sum w - 1| " + num(worst) + o.detail;
  return o;
}

Outcome low_rank_property() {
  Outcome o;
  int count = 0;
  Index worst_excess = -100;
  auto check = [&](const std::vector<SweepRow>& rows) {
    keep_sdp(rows);
    for (const SweepRow& r : rows) {
      ++count;
      worst_excess = std::max(worst_excess, r.rank_j - std::max(r.n, r.d));
      if (r.status != "optimal" || r.rank_j > std::max(r.n, r.d)) {
        o.pass = false;
        o.detail += " [" + r.experiment + " n=" + std::to_string(r.n) + " D=" + std::to_string(r.d) +
                    " rank=" + std::to_string(r.rank_j) + " " + r.status + "]";
      }
    }
  };
  ExperimentOptions opt;
  opt.seed = 1;
  for (Index n = 2; n <= 8; n += 2)
    for (Index d = 2; d <= 8; d += 2) check(random_sample_point(n, d, opt));
  for (Index n = 1; n <= 8; ++n)
    for (Index d = 1; d <= 8; ++d) check(random_matrix_point(n, d, opt));
  if (count < 30) o.pass = false;
  o.detail = std::to_string(count) + " instances, max rank - max(D,n) = " + std::to_string(worst_excess) + o.detail;
  return o;
}

Outcome channel_dominance() {
  Outcome o;
  int count = 0;
  double worst = INFINITY;
  for (Index n = 1; n <= 6; ++n)
    for (Index d = 1; d <= 6; ++d) {
      ExperimentOptions opt;
      opt.seed = 1;
      const auto rows = channel_point(n, d, opt);
      keep_sdp(rows);
      const SweepRow& r = rows.at(0);
      ++count;
      const double margin = r.fidelity - *r.f_init;
      worst = std::min(worst, margin);
      if (margin < -1e-8) {
        o.pass = false;
        o.detail += " [n=" + std::to_string(n) + " D=" + std::to_string(d) + " F-F_init=" + num(margin) + "]";
      }
    }
  o.detail = std::to_string(count) + " channels, min F - F_init " + num(worst) + o.detail;
  return o;
}

Outcome cross_solver() {
  Outcome o;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(seed % 4), d = 1 + static_cast<Index>((seed / 4) % 4);
    const FidelityTensor s = random_s_matrix(n, d, rng);
    const SdpProblem p(s, build_constraints(n, d, ConstraintKind::TracePreserving));
    const SdpSolution sol = solve(p);
    SweepRow row;
    row.experiment = "cross";
    row.n = n;
    row.d = d;
    row.solver = "sdp";
    row.status = to_string(sol.status);
    row.problem = p;
    row.solution = sol;
    g_sdp_rows.push_back(row);
    LowRankConfig cfg;
    cfg.seed = seed;
    const LowRankResult r = run(s, d * n, ConstraintKind::TracePreserving, cfg);
    const double rel = std::abs(r.fidelity - sol.objective) / std::max(std::abs(sol.objective), 1e-300);
    worst = std::max(worst, rel);
    if (sol.status != SdpStatus::Optimal || rel > 1e-5) {
      o.pass = false;
      o.detail += " [seed=" + std::to_string(seed) + " " + std::to_string(n) + "x" + std::to_string(d) + " rel=" + num(rel) + "]";
    }
  }
  o.detail = "20 instances, max relative difference " + num(worst) + o.detail;
  return o;
}

MappingSample flip_signs(const MappingSample& sample, Rng& rng) {
  auto flip = [&](const StateVariant& s) -> StateVariant {
    if (const auto* p = std::get_if<PureState>(&s)) return PureState(Vector(rng.sign() * p->amplitudes()));
    return s;
  };
  std::vector<MappingRecord> recs;
  for (const MappingRecord& r : sample.records()) recs.emplace_back(flip(r.input), flip(r.output), r.omega, r.nu);
  return MappingSample(std::move(recs));
}

Outcome representation_identities() {
  Outcome o;
  double worst_f = 0, worst_apply = 0;
  int sign_mismatch = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 4), d = 1 + static_cast<Index>(rng.next_u64() % 4);
    const Index n_s = 1 + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(d * n));
    const KrausSet ch = testgen::kraus(d, n, n_s, rng);
    const ChoiMatrix j = kraus_to_choi(ch);
    const DensityMatrix rho = testgen::density(n, rng);
    const MappingSample sample = testgen::sample(n, d, 5 + static_cast<Index>(seed % 7), rng, seed % 2 == 0);
    const FidelityTensor s = build_s(sample);

    const double fk = fidelity_kraus(ch, s), fc = fidelity_choi(j, s);
    worst_f = std::max(worst_f, std::abs(fk - fc) / std::max(1.0, std::abs(fk)));
    worst_apply = std::max(worst_apply, (apply_kraus(ch, rho).matrix().matrix() - apply_choi(j, rho).matrix().matrix())
                                            .cwiseAbs()
                                            .maxCoeff());
    if (build_s(flip_signs(sample, rng)).s.matrix() != s.s.matrix()) ++sign_mismatch;
  }
  o.pass = worst_f <= 1e-12 && worst_apply <= 1e-12 && sign_mismatch == 0;
  o.detail = "100 triples: fidelity diff " + num(worst_f) + ", apply diff " + num(worst_apply) +
             ", sign-flip mismatches " + std::to_string(sign_mismatch);
  return o;
}

Outcome certification() {
  Outcome o;
  int optimal = 0, other = 0;
  double worst_primal = 0, worst_eig = 0, worst_gap = 0;
  for (const SweepRow& r : g_sdp_rows) {
    if (!r.solution || r.solution->status != SdpStatus::Optimal) {
      ++other;
      continue;
    }
    ++optimal;
    const VerifyReport rep = verify(*r.problem, *r.solution);
    worst_primal = std::max(worst_primal, rep.primal_residual);
    worst_eig = std::min({worst_eig, rep.min_eig_j, rep.min_eig_slack});
    worst_gap = std::max({worst_gap, std::abs(rep.relative_gap), std::abs(rep.complementarity)});
    if (!rep.passes(1e-8, 1e-8, 1e-7)) {
      o.pass = false;
      o.detail += " [" + r.experiment + " n=" + std::to_string(r.n) + " D=" + std::to_string(r.d) + "]";
    }
  }
  double worst_restart = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Index n = 2 + static_cast<Index>(seed % 3), d = 2 + static_cast<Index>((seed / 3) % 3);
    const SdpProblem p(random_s_matrix(n, d, rng), build_constraints(n, d, ConstraintKind::TracePreserving));
    SolverConfig cfg;
    const SdpSolution a = solve(p, cfg);
    cfg.start_j = kraus_to_choi(random_tp_channel(n, d, d * n, rng)).j();
    const SdpSolution b = solve(p, cfg);
    const double rel = std::abs(a.objective - b.objective) / std::max(1.0, std::abs(a.objective));
    worst_restart = std::max(worst_restart, rel);
    if (a.status != SdpStatus::Optimal || b.status != SdpStatus::Optimal || rel > 10 * cfg.tol_gap) {
      o.pass = false;
      o.detail += " [restart seed=" + std::to_string(seed) + " rel=" + num(rel) + "]";
    }
  }
  o.detail = std::to_string(optimal) + " optimal solutions verified (" + std::to_string(other) +
             " not optimal): max primal residual " + num(worst_primal) + ", min eig " + num(worst_eig) +
             ", max gap " + num(worst_gap) + "; 10 restarts, max difference " + num(worst_restart) + o.detail;
  return o;
}

Outcome formulas() {
  Outcome o;
  int dims_bad = 0, helper_bad = 0;
  double worst_gauge = 0;
  Rng rng(10);
  for (Index n = 1; n <= 5; ++n)
    for (Index d = 1; d <= 5; ++d) {
      for (Index n_s = 1; n_s <= d * n; ++n_s) {
        Index cells = 0;
        for (Index i = 0; i < d * n; ++i)
          for (Index s = 0; s < n_s; ++s) cells += s <= i;
        const LowRankDims tp = dims(n, d, n_s, ConstraintKind::TracePreserving);
        const LowRankDims un = dims(n, d, n_s, ConstraintKind::UnitPreserving);
        if (tp.full != cells || un.full != cells || tp.full - tp.reduced != n * (n + 1) / 2 - 1 ||
            un.full - un.reduced != d * (d + 1) / 2 - 1) {
          ++dims_bad;
        }
      }
      const Index n_s = 1 + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(d * n));
      Matrix b = testgen::matrix(d * n, n_s, rng);
      for (Index i = 0; i < b.rows(); ++i)
        for (Index s = i + 1; s < n_s; ++s) b(i, s) = 0;
      const LowerDiagB packed = pack(b, n, d);
      if (static_cast<Index>(helper_constraints(packed, ConstraintKind::TracePreserving).size()) != n * (n + 1) / 2 - 1 ||
          static_cast<Index>(helper_constraints(packed, ConstraintKind::UnitPreserving).size()) != d * (d + 1) / 2 - 1) {
        ++helper_bad;
      }
      const Matrix rotated = b * random_orthogonal(n_s, rng);
      const LowerDiagB g = detail::regauge(rotated, n, d);
      const Matrix j0 = rotated * rotated.transpose(), j1 = g.matrix() * g.matrix().transpose();
      worst_gauge = std::max(worst_gauge, (j0 - j1).cwiseAbs().maxCoeff());
    }
  o.pass = dims_bad == 0 && helper_bad == 0 && worst_gauge <= 1e-10;
  o.detail = "n,D <= 5: dims mismatches " + std::to_string(dims_bad) + ", helper count mismatches " +
             std::to_string(helper_bad) + ", max re-gauge Choi change " + num(worst_gauge);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {
      unitary_reconstruction, toy_channel_recovery, projective_recovery,        trace_channel_limit, low_rank_property,
      channel_dominance,      cross_solver, representation_identities, certification,       formulas};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu: %s  %s  (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
