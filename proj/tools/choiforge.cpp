// choiforge: experiment sweeps, one-off solves and independent verification.
//
// Exit codes: 0 success, 1 usage or input error, 2 a --strict expectation
// failed (or verify rejected a solution), 3 a solver failed hard.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "choiforge/choiforge.hpp"

namespace fs = std::filesystem;
using namespace choiforge;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitStrict = 2;
constexpr int kExitHard = 3;

// "2..6", "2,3,5" or "4".
std::vector<Index> parse_range(const std::string& text) {
  std::vector<Index> out;
  auto to_index = [&](const std::string& s) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != s.size() || v < 1) fail(ErrorKind::InvalidInput, "bad dimension list '" + text + "'");
    return static_cast<Index>(v);
  };
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const Index lo = to_index(text.substr(0, dots)), hi = to_index(text.substr(dots + 2));
    if (hi < lo) fail(ErrorKind::InvalidInput, "empty range '" + text + "'");
    for (Index v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(to_index(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CHOIFORGE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring non-numeric CHOIFORGE_SEED='" << env << "'\n";
    }
  }
  return 1;
}

struct Common {
  std::string n = "2..4";
  std::string d;
  std::optional<Index> ns;
  std::string kind = "tp";
  std::string solver = "sdp";
  std::uint64_t seed = default_seed();
  std::optional<Index> m;
  std::string out;
  bool strict = false;
  bool allow_large = false;
  std::string export_interchange;
  std::string trace;
  std::string artifacts;
  unsigned jobs = 1;
  bool timing = false;
  std::optional<double> tol_gap, tol_feas;
  std::optional<int> max_iter, starts;
};

const std::map<std::string, ConstraintKind> kKinds{{"tp", ConstraintKind::TracePreserving},
                                                   {"unit", ConstraintKind::UnitPreserving}};
const std::map<std::string, SolverChoice> kSolvers{
    {"sdp", SolverChoice::Sdp}, {"lowrank", SolverChoice::LowRank}, {"both", SolverChoice::Both}};

void add_solver_options(CLI::App* sub, Common& c) {
  sub->add_option("--ns", c.ns, "Kraus rank for the fixed-rank solver")->check(CLI::PositiveNumber);
  sub->add_option("--kind", c.kind, "Constraint kind")->check(CLI::IsMember({"tp", "unit"}));
  sub->add_option("--solver", c.solver, "Solver")->check(CLI::IsMember({"sdp", "lowrank", "both"}));
  sub->add_option("--tol-gap", c.tol_gap, "SDP relative gap tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--tol-feas", c.tol_feas, "SDP feasibility tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", c.max_iter, "SDP iteration limit")->check(CLI::PositiveNumber);
  sub->add_option("--starts", c.starts, "Random starts for the fixed-rank solver")->check(CLI::PositiveNumber);
  sub->add_flag("--strict", c.strict, "Exit 2 when an expected outcome is not met");
  sub->add_flag("--allow-large", c.allow_large, "Allow D*n above the desk limit");
}

void add_sweep_options(CLI::App* sub, Common& c, bool with_d) {
  sub->add_option("--n", c.n, "Input dimensions: 'a..b', 'a,b,c' or 'a'");
  if (with_d) sub->add_option("--d", c.d, "Output dimensions (default: D = n)");
  sub->add_option("--seed", c.seed, "Seed (default $CHOIFORGE_SEED or 1)");
  sub->add_option("--m", c.m, "Sample size")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "CSV output path (default stdout)");
  sub->add_option("--export-interchange", c.export_interchange, "Directory for SDPA files of each SDP point");
  sub->add_option("--trace", c.trace, "Directory for per-row iteration traces");
  sub->add_option("--artifacts", c.artifacts, "Directory for per-row problem and Choi JSON");
  sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--timing", c.timing, "Write measured wall_ms instead of 0");
  add_solver_options(sub, c);
}

ExperimentOptions experiment_options(const Common& c) {
  ExperimentOptions opt;
  opt.seed = c.seed;
  opt.m = c.m;
  opt.solver = kSolvers.at(c.solver);
  opt.n_s = c.ns;
  opt.kind = kKinds.at(c.kind);
  opt.allow_large = c.allow_large;
  opt.record_trace = !c.trace.empty();
  opt.lowrank_starts = c.starts;
  if (c.tol_gap) opt.sdp.tol_gap = *c.tol_gap;
  if (c.tol_feas) opt.sdp.tol_feas = *c.tol_feas;
  if (c.max_iter) opt.sdp.max_iter = *c.max_iter;
  return opt;
}

std::string row_stem(const SweepRow& r) {
  return r.experiment + "-n" + std::to_string(r.n) + "-d" + std::to_string(r.d) + "-" + r.solver;
}

void write_side_files(const Common& c, const std::vector<SweepRow>& rows) {
  for (const std::string& dir : {c.trace, c.artifacts, c.export_interchange})
    if (!dir.empty()) fs::create_directories(dir);
  for (const SweepRow& r : rows) {
    const std::string stem = row_stem(r);
    if (!c.trace.empty()) {
      if (!r.sdp_trace.empty()) io::write_file(fs::path(c.trace) / (stem + ".trace.csv"), io::solver_trace_csv(r.sdp_trace));
      if (!r.lowrank_trace.empty())
        io::write_file(fs::path(c.trace) / (stem + ".trace.csv"), io::lowrank_trace_csv(r.lowrank_trace));
    }
    if (!c.artifacts.empty() && r.choi && r.s) {
      io::write_file(fs::path(c.artifacts) / (stem + ".problem.json"), io::tensor_to_json(*r.s).dump(1) + "\n");
      io::write_file(fs::path(c.artifacts) / (stem + ".choi.json"), io::choi_to_json(*r.choi).dump(1) + "\n");
      if (r.solution)
        io::write_file(fs::path(c.artifacts) / (stem + ".solution.json"), io::solution_to_json(*r.solution).dump(1) + "\n");
    }
    if (!c.export_interchange.empty() && r.problem)
      io::write_file(fs::path(c.export_interchange) / (stem + ".dat-s"), io::export_sdpa(*r.problem));
  }
}

void report_cross_check(const std::vector<SweepRow>& rows) {
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const SweepRow &a = rows[i], &b = rows[i + 1];
    if (a.solver != "sdp" || b.solver != "lowrank" || a.n != b.n || a.d != b.d) continue;
    const double rel = std::abs(a.fidelity - b.fidelity) / std::max(1.0, std::abs(a.fidelity));
    std::cerr << "cross-check " << a.experiment << " n=" << a.n << " d=" << a.d << ": sdp " << io::fmt(a.fidelity)
              << " lowrank " << io::fmt(b.fidelity) << " rel " << io::fmt(rel) << "\n";
  }
}

int finish_sweep(const Common& c, const std::vector<SweepRow>& rows) {
  const std::string csv = sweep_csv(rows, c.timing);
  if (c.out.empty())
    std::cout << csv;
  else
    io::write_file(c.out, csv);
  write_side_files(c, rows);
  if (c.solver == "both") report_cross_check(rows);
  int code = 0;
  for (const SweepRow& r : rows) {
    if (row_failed_hard(r)) {
      std::cerr << row_stem(r) << ": " << r.status << "\n";
      code = kExitHard;
    } else if (c.strict && r.check == "fail" && code == 0) {
      code = kExitStrict;
    }
  }
  if (c.strict)
    for (const SweepRow& r : rows)
      if (r.check == "fail" && !row_failed_hard(r)) std::cerr << row_stem(r) << ": expectation not met\n";
  return code;
}

std::vector<SweepPoint> grid(const Common& c, bool square) {
  const std::vector<Index> ns = parse_range(c.n);
  std::vector<SweepPoint> pts;
  if (square || c.d.empty()) {
    for (Index n : ns) pts.push_back({n, n});
    return pts;
  }
  const std::vector<Index> ds = parse_range(c.d);
  for (Index n : ns)
    for (Index d : ds) pts.push_back({n, d});
  return pts;
}

// ---------------------------------------------------------------------------
// solve / verify

struct SolveArgs {
  std::string problem, sample, classical, sdpa;
  Index sdpa_n = 0, sdpa_d = 0;
  bool projective = false;
  std::string out_dir = ".";
  std::string name = "solution";
};

struct LoadedProblem {
  FidelityTensor s;
  std::optional<DenominatorTensor> q;
  std::optional<SdpProblem> sdpa;
};

LoadedProblem load_problem(const SolveArgs& a) {
  const int sources = !a.problem.empty() + !a.sample.empty() + !a.classical.empty() + !a.sdpa.empty();
  require(sources == 1, ErrorKind::InvalidInput, "give exactly one of --problem, --sample, --classical, --sdpa");
  LoadedProblem out;
  std::optional<MappingSample> sample;
  if (!a.problem.empty()) {
    out.s = io::tensor_from_json(io::parse(io::read_file(a.problem), a.problem));
  } else if (!a.sdpa.empty()) {
    require(a.sdpa_n > 0 && a.sdpa_d > 0, ErrorKind::InvalidInput, "--sdpa needs --n and --d");
    out.sdpa = io::import_sdpa(io::read_file(a.sdpa), a.sdpa_d, a.sdpa_n);
    out.s = out.sdpa->objective();
  } else {
    if (!a.sample.empty()) {
      sample = io::sample_from_jsonl(io::read_file(a.sample));
    } else {
      const io::ClassicalData data = io::classical_from_csv(io::read_file(a.classical));
      sample = classical_transform(data.xs, data.fs);
    }
    out.s = build_s(*sample);
    if (a.projective) out.q = build_q(*sample);
  }
  require(!a.projective || out.q, ErrorKind::InvalidInput, "--projective needs --sample or --classical");
  return out;
}

int cmd_solve(const Common& c, const SolveArgs& a) {
  const LoadedProblem lp = load_problem(a);
  const Index n = lp.s.d_in, d = lp.s.d_out;
  require(d * n <= kDeskLimit || c.allow_large, ErrorKind::InvalidInput, "D*n exceeds the desk limit; pass --allow-large");
  const ConstraintKind kind = a.projective ? ConstraintKind::UnitPreserving : kKinds.at(c.kind);
  const ExperimentOptions opt = experiment_options(c);
  fs::create_directories(a.out_dir);
  const fs::path base = fs::path(a.out_dir) / a.name;
  int code = 0;

  const SdpProblem p = lp.sdpa ? *lp.sdpa
                       : lp.q  ? SdpProblem(lp.s, build_projective_constraints(n, d, *lp.q))
                               : SdpProblem(lp.s, build_constraints(n, d, kind));
  if (!c.export_interchange.empty()) io::write_file(c.export_interchange, io::export_sdpa(p));

  std::optional<double> sdp_value;
  if (opt.solver != SolverChoice::LowRank) {
    SolverConfig cfg = opt.sdp;
    cfg.record_trace = !c.trace.empty();
    const SdpSolution sol = solve(p, cfg);
    const VerifyReport rep = verify(p, sol);
    io::write_file(base.string() + ".choi.json", io::choi_to_json(sol.j).dump(1) + "\n");
    io::write_file(base.string() + ".solution.json", io::solution_to_json(sol).dump(1) + "\n");
    io::write_file(base.string() + ".verify.json", io::verify_to_json(rep).dump(1) + "\n");
    io::write_file(base.string() + ".kraus.json", io::kraus_to_json(choi_to_kraus(sol.j)).dump(1) + "\n");
    if (cfg.record_trace) io::write_file(c.trace, io::solver_trace_csv(sol.trace));
    std::cout << "sdp: status " << to_string(sol.status) << ", objective " << io::fmt(sol.objective) << ", rank "
              << numerical_rank(sol.j) << ", iterations " << sol.iterations << "\n";
    if (lp.q) std::cout << "sdp: ratio fidelity " << io::fmt(fidelity_ratio(choi_to_kraus(sol.j), lp.s, *lp.q)) << "\n";
    if (sol.status == SdpStatus::NumericalFailure || sol.status == SdpStatus::Infeasible) code = kExitHard;
    if (c.strict && code == 0 && !(sol.status == SdpStatus::Optimal && rep.passes())) code = kExitStrict;
    sdp_value = sol.objective;
  }
  if (opt.solver != SolverChoice::Sdp) {
    LowRankConfig cfg = opt.lowrank;
    cfg.seed = opt.seed;
    cfg.record_trace = !c.trace.empty();
    const Index n_s = opt.n_s.value_or(d * n);
    cfg.starts = opt.lowrank_starts.value_or(n_s < d * n ? kLowRankStarts : 1);
    const LowRankResult r = lp.q ? run_ratio(lp.s, *lp.q, n_s, cfg) : run(lp.s, n_s, kind, cfg);
    const std::string suffix = opt.solver == SolverChoice::Both ? ".lowrank" : "";
    io::write_file(base.string() + suffix + ".kraus.json", io::kraus_to_json(r.kraus).dump(1) + "\n");
    io::write_file(base.string() + suffix + ".choi.json", io::choi_to_json(kraus_to_choi(r.kraus)).dump(1) + "\n");
    if (cfg.record_trace)
      io::write_file(opt.solver == SolverChoice::Both ? c.trace + ".lowrank" : c.trace, io::lowrank_trace_csv(r.trace));
    std::cout << "lowrank: status " << to_string(r.status) << ", " << (lp.q ? "ratio " : "fidelity ")
              << io::fmt(r.fidelity) << ", N_s " << n_s << ", iterations " << r.iterations << "\n";
    if (sdp_value && !lp.q) {
      const double rel = std::abs(*sdp_value - r.fidelity) / std::max(1.0, std::abs(*sdp_value));
      std::cout << "cross-check: relative difference " << io::fmt(rel) << "\n";
    }
    if (c.strict && code == 0 && r.status != LowRankStatus::Converged) code = kExitStrict;
  }
  return code;
}

struct VerifyArgs {
  std::string problem, sample, choi, solution, constraints = "tp";
  bool projective = false;
};

int cmd_verify(const VerifyArgs& a) {
  SolveArgs sa;
  sa.problem = a.problem;
  sa.sample = a.sample;
  sa.projective = a.projective;
  const LoadedProblem lp = load_problem(sa);
  require(a.choi.empty() != a.solution.empty(), ErrorKind::InvalidInput, "give exactly one of --choi, --solution");
  SdpSolution sol = a.solution.empty() ? SdpSolution{} : io::solution_from_json(io::parse(io::read_file(a.solution), a.solution));
  if (!a.choi.empty()) sol.j = io::choi_from_json(io::parse(io::read_file(a.choi), a.choi));
  require(sol.j.d_in() == lp.s.d_in && sol.j.d_out() == lp.s.d_out, ErrorKind::DimensionMismatch,
          "Choi dimensions do not match the problem");

  io::Json out;
  const Vector ev = sym_eigenvalues(sol.j.j());
  out["fidelity"] = fidelity_choi(sol.j, lp.s);
  out["rank"] = numerical_rank(sol.j);
  out["min_eig"] = ev(0);
  out["tp_residual"] = constraint_residual(sol.j, ConstraintKind::TracePreserving);
  out["unit_residual"] = constraint_residual(sol.j, ConstraintKind::UnitPreserving);
  bool ok = ev(0) >= -1e-8 * std::max(1.0, std::abs(ev(ev.size() - 1)));
  if (lp.q) out["ratio_fidelity"] = fidelity_ratio(choi_to_kraus(sol.j), lp.s, *lp.q);
  if (a.constraints != "none") {
    const Index n = lp.s.d_in, d = lp.s.d_out;
    const SdpProblem p = lp.q ? SdpProblem(lp.s, build_projective_constraints(n, d, *lp.q))
                              : SdpProblem(lp.s, build_constraints(n, d, kKinds.at(a.constraints)));
    const VerifyReport rep = verify(p, sol);
    out["sdp"] = io::verify_to_json(rep);
    // Without duals only the primal side can be certified.
    ok = ok && (sol.dual_y.size() ? rep.passes() : rep.primal_residual <= 1e-8);
  }
  out["passes"] = ok;
  std::cout << out.dump(1) << "\n";
  return ok ? 0 : kExitStrict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum channel reconstruction from mapping samples"};
  app.require_subcommand(1);
  Common c;
  SolveArgs sa;
  VerifyArgs va;

  auto* unitary = app.add_subcommand("unitary-sweep", "Learn a random rotation U from a trajectory (n = D)");
  add_sweep_options(unitary, c, false);
  auto* rsample = app.add_subcommand("random-sample-sweep", "Random unit input/output pairs");
  add_sweep_options(rsample, c, true);
  auto* rmatrix = app.add_subcommand("random-matrix-sweep", "Random symmetric S");
  add_sweep_options(rmatrix, c, true);
  auto* channel = app.add_subcommand("channel-sweep", "Samples produced by a full-rank random channel");
  add_sweep_options(channel, c, true);
  auto* toy = app.add_subcommand("toy-channel", "Rank-one channel with D > n");
  add_sweep_options(toy, c, true);
  auto* proj = app.add_subcommand("projective", "Recover a projective operator P (D <= n)");
  add_sweep_options(proj, c, true);

  auto* solve_cmd = app.add_subcommand("solve", "Solve one problem from a file");
  solve_cmd->add_option("--problem", sa.problem, "Problem JSON holding S");
  solve_cmd->add_option("--sample", sa.sample, "Sample as JSON lines");
  solve_cmd->add_option("--classical", sa.classical, "Classical x -> f data as CSV");
  solve_cmd->add_option("--sdpa", sa.sdpa, "Problem in SDPA sparse format (needs --n, --d)");
  solve_cmd->add_option("--n", sa.sdpa_n, "Input dimension for --sdpa");
  solve_cmd->add_option("--d", sa.sdpa_d, "Output dimension for --sdpa");
  solve_cmd->add_flag("--projective", sa.projective, "Projective constraints with the ratio denominator");
  solve_cmd->add_option("--out-dir", sa.out_dir, "Output directory");
  solve_cmd->add_option("--name", sa.name, "Output file stem");
  solve_cmd->add_option("--seed", c.seed, "Seed for the fixed-rank solver");
  solve_cmd->add_option("--export-interchange", c.export_interchange, "Write the SDP in SDPA format to this path");
  solve_cmd->add_option("--trace", c.trace, "Write the iteration trace CSV to this path");
  add_solver_options(solve_cmd, c);

  auto* verify_cmd = app.add_subcommand("verify", "Independently check a stored solution");
  verify_cmd->add_option("--problem", va.problem, "Problem JSON holding S");
  verify_cmd->add_option("--sample", va.sample, "Sample as JSON lines");
  verify_cmd->add_option("--choi", va.choi, "Choi JSON");
  verify_cmd->add_option("--solution", va.solution, "Solution JSON with duals");
  verify_cmd->add_option("--constraints", va.constraints, "Constraint set to check")
      ->check(CLI::IsMember({"tp", "unit", "none"}));
  verify_cmd->add_flag("--projective", va.projective, "Projective constraints (needs --sample)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help prints and exits 0; every other parse problem is a usage error.
    return app.exit(e) == 0 ? 0 : kExitInput;
  }

  try {
    const ExperimentOptions opt = experiment_options(c);
    auto sweep = [&](const std::string& name, bool square, auto fn) {
      const std::vector<SweepPoint> pts = grid(c, square);
      for (const SweepPoint& p : pts) detail::guard_size(p.n, p.d, opt);
      return finish_sweep(c, run_sweep(name, pts, fn, c.jobs, c.seed));
    };
    if (*unitary) return sweep("unitary", true, [&](const SweepPoint& p) { return unitary_point(p.n, opt); });
    if (*rsample)
      return sweep("random-sample", false, [&](const SweepPoint& p) { return random_sample_point(p.n, p.d, opt); });
    if (*rmatrix)
      return sweep("random-matrix", false, [&](const SweepPoint& p) { return random_matrix_point(p.n, p.d, opt); });
    if (*channel) return sweep("channel", false, [&](const SweepPoint& p) { return channel_point(p.n, p.d, opt); });
    if (*toy) return sweep("toy-channel", false, [&](const SweepPoint& p) { return toy_channel_point(p.n, p.d, opt); });
    if (*proj) return sweep("projective", false, [&](const SweepPoint& p) { return projective_point(p.n, p.d, opt); });
    if (*solve_cmd) return cmd_solve(c, sa);
    if (*verify_cmd) return cmd_verify(va);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
