#pragma once

// File formats: JSON documents for channels, Choi matrices, problems and
// solutions; JSON lines for mapping samples; the sparse SDPA text format for
// handing problems to external solvers; CSV for sweeps and iteration traces.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "choiforge/channel.hpp"
#include "choiforge/error.hpp"
#include "choiforge/fidelity.hpp"
#include "choiforge/linalg.hpp"
#include "choiforge/lowrank.hpp"
#include "choiforge/sdp.hpp"

namespace choiforge::io {

using Json = nlohmann::json;

/// %.17g: enough digits that every double reads back bit-identical.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// matrices inside JSON

namespace detail {

inline Json row_major(const Matrix& m) {
  Json a = Json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

inline Matrix from_row_major(const Json& a, Index rows, Index cols, const std::string& what) {
  if (!a.is_array() || static_cast<Index>(a.size()) != rows * cols) {
    fail(ErrorKind::Parse, what + ": expected an array of " + std::to_string(rows * cols) + " numbers");
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const Json& v = a[static_cast<std::size_t>(i * cols + j)];
      if (!v.is_number()) fail(ErrorKind::Parse, what + ": entry " + std::to_string(i * cols + j) + " is not a number");
      m(i, j) = v.get<double>();
    }
  return m;
}

inline Index get_dim(const Json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number_integer() || doc[key].get<long long>() < 1) {
    fail(ErrorKind::Parse, std::string("missing or invalid \"") + key + "\"");
  }
  return static_cast<Index>(doc[key].get<long long>());
}

inline void check_format(const Json& doc, const char* format) {
  if (!doc.is_object() || !doc.contains("format") || doc["format"] != format) {
    fail(ErrorKind::Parse, std::string("expected a document with \"format\": \"") + format + "\"");
  }
}

}  // namespace detail

/// Json::parse with the failure turned into a Parse error naming `what`.
inline Json parse(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Parse, what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// channels and Choi matrices

/// {"format": "choiforge.kraus", "d_in", "d_out", "n_s",
///  "operators": [[B_0 row-major], ...]}
inline Json kraus_to_json(const KrausSet& ch) {
  Json ops = Json::array();
  for (const Matrix& b : ch.operators()) ops.push_back(detail::row_major(b));
  return {{"format", "choiforge.kraus"}, {"d_in", ch.d_in()}, {"d_out", ch.d_out()}, {"n_s", ch.n_s()}, {"operators", ops}};
}

inline KrausSet kraus_from_json(const Json& doc) {
  detail::check_format(doc, "choiforge.kraus");
  const Index n = detail::get_dim(doc, "d_in"), d = detail::get_dim(doc, "d_out"), n_s = detail::get_dim(doc, "n_s");
  if (!doc.contains("operators") || !doc["operators"].is_array() || static_cast<Index>(doc["operators"].size()) != n_s) {
    fail(ErrorKind::Parse, "\"operators\" must hold n_s arrays");
  }
  std::vector<Matrix> ops;
  for (Index s = 0; s < n_s; ++s)
    ops.push_back(detail::from_row_major(doc["operators"][static_cast<std::size_t>(s)], d, n, "operator " + std::to_string(s)));
  return KrausSet(d, n, std::move(ops));
}

/// {"format": "choiforge.choi", "d_in", "d_out", "entries": [Dn x Dn row-major]}
inline Json choi_to_json(const ChoiMatrix& j) {
  return {{"format", "choiforge.choi"}, {"d_in", j.d_in()}, {"d_out", j.d_out()}, {"entries", detail::row_major(j.matrix())}};
}

inline ChoiMatrix choi_from_json(const Json& doc) {
  detail::check_format(doc, "choiforge.choi");
  const Index n = detail::get_dim(doc, "d_in"), d = detail::get_dim(doc, "d_out");
  const Matrix m = detail::from_row_major(doc.value("entries", Json()), d * n, d * n, "Choi entries");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    fail(ErrorKind::Parse, "Choi entries are not symmetric");
  }
  return ChoiMatrix(d, n, SymMatrix(m));
}

/// {"format": "choiforge.problem", "d_in", "d_out", "s": [...]}
inline Json tensor_to_json(const FidelityTensor& s) {
  return {{"format", "choiforge.problem"}, {"d_in", s.d_in}, {"d_out", s.d_out}, {"s", detail::row_major(s.s.matrix())}};
}

inline FidelityTensor tensor_from_json(const Json& doc) {
  detail::check_format(doc, "choiforge.problem");
  const Index n = detail::get_dim(doc, "d_in"), d = detail::get_dim(doc, "d_out");
  const Matrix m = detail::from_row_major(doc.value("s", Json()), d * n, d * n, "S entries");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    fail(ErrorKind::Parse, "S entries are not symmetric");
  }
  return FidelityTensor(d, n, SymMatrix(m));
}

/// Solution document: the Choi matrix plus the dual certificate.
inline Json solution_to_json(const SdpSolution& sol) {
  Json doc = choi_to_json(sol.j);
  doc["format"] = "choiforge.solution";
  doc["status"] = to_string(sol.status);
  doc["objective"] = sol.objective;
  doc["gap"] = sol.gap;
  doc["iterations"] = sol.iterations;
  Json y = Json::array();
  for (Index i = 0; i < sol.dual_y.size(); ++i) y.push_back(sol.dual_y(i));
  doc["dual_y"] = y;
  return doc;
}

/// Reads a solution document, or a bare Choi document (no dual part).
inline SdpSolution solution_from_json(const Json& doc) {
  SdpSolution sol;
  Json choi = doc;
  const bool full = doc.is_object() && doc.value("format", "") == "choiforge.solution";
  if (full) choi["format"] = "choiforge.choi";
  sol.j = choi_from_json(choi);
  sol.objective = 0;
  if (full && doc.contains("dual_y") && doc["dual_y"].is_array()) {
    const Json& y = doc["dual_y"];
    sol.dual_y = Vector(static_cast<Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!y[i].is_number()) fail(ErrorKind::Parse, "dual_y entry " + std::to_string(i) + " is not a number");
      sol.dual_y(static_cast<Index>(i)) = y[i].get<double>();
    }
  }
  return sol;
}

inline Json verify_to_json(const VerifyReport& r) {
  return {{"format", "choiforge.verify"},
          {"primal_residual", r.primal_residual},
          {"min_eig_j", r.min_eig_j},
          {"min_eig_slack", r.min_eig_slack},
          {"dual_residual", r.dual_residual},
          {"relative_gap", r.relative_gap},
          {"complementarity", r.complementarity},
          {"objective", r.objective},
          {"passes", r.passes()}};
}

// ---------------------------------------------------------------------------
// mapping samples, one JSON object per line:
//
//   {"input": {"kind": "pure", "entries": [...]},
//    "output": {"kind": "mixed", "dim": 2, "entries": [4 numbers]},
//    "omega": 1.0, "nu": 1.0}
//
// "nu" defaults to "omega"; blank lines and lines starting with '#' are
// skipped.

namespace detail {

inline Json state_to_json(const StateVariant& s) {
  if (const auto* p = std::get_if<PureState>(&s)) {
    Json a = Json::array();
    for (Index i = 0; i < p->dim(); ++i) a.push_back((*p)(i));
    return {{"kind", "pure"}, {"entries", a}};
  }
  const auto& m = std::get<DensityMatrix>(s);
  return {{"kind", "mixed"}, {"dim", m.dim()}, {"entries", row_major(m.matrix().matrix())}};
}

inline StateVariant state_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind")) fail(ErrorKind::Parse, "state needs a \"kind\"");
  const std::string kind = j["kind"].is_string() ? j["kind"].get<std::string>() : "";
  if (kind == "pure") {
    const Json& a = j.value("entries", Json());
    if (!a.is_array() || a.empty()) fail(ErrorKind::Parse, "pure state needs nonempty \"entries\"");
    const Matrix v = from_row_major(a, static_cast<Index>(a.size()), 1, "pure state");
    // Tolerate the rounding of a text round trip, then store exactly unit norm.
    const double nrm = v.norm();
    if (std::abs(nrm - 1.0) > 1e-9) fail(ErrorKind::Parse, "pure state is not unit norm (norm " + fmt(nrm) + ")");
    return PureState::normalized(v.col(0));
  }
  if (kind == "mixed") {
    const Index dim = get_dim(j, "dim");
    return DensityMatrix(SymMatrix(from_row_major(j.value("entries", Json()), dim, dim, "mixed state")));
  }
  fail(ErrorKind::Parse, "unknown state kind \"" + kind + "\"");
}

}  // namespace detail

inline std::string sample_to_jsonl(const MappingSample& sample) {
  std::string out;
  for (const MappingRecord& r : sample.records()) {
    Json line = {{"input", detail::state_to_json(r.input)},
                 {"output", detail::state_to_json(r.output)},
                 {"omega", r.omega},
                 {"nu", r.nu}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

/// Errors carry the 1-based line number of the offending record.
inline MappingSample sample_from_jsonl(const std::string& text) {
  std::vector<MappingRecord> records;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    try {
      const Json j = parse(line, "record");
      if (!j.is_object() || !j.contains("input") || !j.contains("output")) {
        fail(ErrorKind::Parse, "record needs \"input\" and \"output\"");
      }
      const Json& w = j.value("omega", Json(1.0));
      if (!w.is_number()) fail(ErrorKind::Parse, "\"omega\" is not a number");
      const double omega = w.get<double>();
      const Json& nu = j.value("nu", Json(omega));
      if (!nu.is_number()) fail(ErrorKind::Parse, "\"nu\" is not a number");
      records.emplace_back(detail::state_from_json(j["input"]), detail::state_from_json(j["output"]), omega,
                           nu.get<double>());
    } catch (const Error& e) {
      fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (records.empty()) fail(ErrorKind::Parse, "sample file has no records");
  try {
    return MappingSample(std::move(records));
  } catch (const Error& e) {
    fail(ErrorKind::Parse, std::string("sample: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// SDPA sparse format
//
// Our problem  max Tr(S J)  s.t.  Tr(A_c J) = beta_c,  J >= 0  is the dual
// form of an SDPA problem with F_0 = S, F_c = A_c and c = beta:
//
//   SDPA primal: min sum_c beta_c x_c   s.t.  X = sum_c F_c x_c - F_0 >= 0
//   SDPA dual:   max Tr(F_0 Y)          s.t.  Tr(F_c Y) = beta_c, Y >= 0
//
// so an external solver's dual variable Y is our J, its objective equals
// ours, and its x is our dual_y.

inline std::string export_sdpa(const SdpProblem& p) {
  std::ostringstream out;
  const Index m = p.num_constraints(), dim = p.dim();
  out << "\"choiforge problem: D=" << p.objective().d_out << " n=" << p.objective().d_in << "\"\n";
  out << m << " = mDIM\n1 = nBLOCK\n" << dim << " = bLOCKsTRUCT\n";
  const Vector b = p.rhs();
  for (Index c = 0; c < m; ++c) out << (c ? " " : "") << fmt(b(c));
  out << "\n";
  auto emit = [&](Index mat, const Matrix& a) {
    for (Index i = 0; i < dim; ++i)
      for (Index j = i; j < dim; ++j)
        if (a(i, j) != 0.0) out << mat << " 1 " << i + 1 << " " << j + 1 << " " << fmt(a(i, j)) << "\n";
  };
  emit(0, p.objective().s.matrix());
  for (Index c = 0; c < m; ++c) emit(c + 1, p.constraints()[static_cast<std::size_t>(c)].a.matrix());
  return out.str();
}

/// Reads a single-block SDPA file back into a problem with the given D, n
/// (SDPA carries only the block size).
inline SdpProblem import_sdpa(const std::string& text, Index d_out, Index d_in) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  std::vector<std::pair<int, std::string>> body;  // file line number, text
  auto err = [&](const std::string& msg) { fail(ErrorKind::Parse, "SDPA line " + std::to_string(lineno) + ": " + msg); };
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '"' || line[first] == '*') continue;
    for (char& ch : line)
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    if (header.size() < 4) {
      header.push_back(line);
      if (header.size() == 4) {
        std::istringstream h0(header[0]), h1(header[1]), h2(header[2]);
        long long m = -1, nb = -1, bs = -1;
        h0 >> m;
        h1 >> nb;
        h2 >> bs;
        if (m < 0 || nb != 1 || bs != d_out * d_in) err("expected one block of size D*n");
      }
      continue;
    }
    body.emplace_back(lineno, line);
  }
  if (header.size() < 4) fail(ErrorKind::Parse, "SDPA file is truncated");
  long long m = 0;
  std::istringstream(header[0]) >> m;
  const Index dim = d_out * d_in;
  Vector beta(m);
  {
    std::istringstream hb(header[3]);
    for (long long c = 0; c < m; ++c)
      if (!(hb >> beta(static_cast<Index>(c)))) fail(ErrorKind::Parse, "SDPA objective vector is short");
  }
  std::vector<Matrix> mats(static_cast<std::size_t>(m + 1), Matrix::Zero(dim, dim));
  for (const auto& [ln, l] : body) {
    lineno = ln;
    std::istringstream ls(l);
    long long mat, blk, i, j;
    double v;
    if (!(ls >> mat >> blk >> i >> j >> v)) err("malformed entry");
    if (mat < 0 || mat > m || blk != 1 || i < 1 || j < 1 || i > dim || j > dim) err("entry index out of range");
    Matrix& a = mats[static_cast<std::size_t>(mat)];
    a(i - 1, j - 1) = v;
    a(j - 1, i - 1) = v;
  }
  std::vector<LinearConstraint> cons;
  for (long long c = 1; c <= m; ++c) cons.push_back({SymMatrix(mats[static_cast<std::size_t>(c)]), beta(c - 1)});
  return SdpProblem(FidelityTensor(d_out, d_in, SymMatrix(mats[0])), std::move(cons));
}

// ---------------------------------------------------------------------------
// traces

inline std::string solver_trace_csv(const std::vector<IterationRecord>& trace) {
  std::string out = "# choiforge-sdp-trace v1\niteration,primal_objective,dual_objective,gap,relative_gap,"
                    "primal_residual,dual_residual,sigma,step_primal,step_dual\n";
  for (const IterationRecord& r : trace) {
    out += std::to_string(r.iteration) + "," + fmt(r.primal_objective) + "," + fmt(r.dual_objective) + "," +
           fmt(r.gap) + "," + fmt(r.relative_gap) + "," + fmt(r.primal_residual) + "," + fmt(r.dual_residual) + "," +
           fmt(r.sigma) + "," + fmt(r.step_primal) + "," + fmt(r.step_dual) + "\n";
  }
  return out;
}

inline std::string lowrank_trace_csv(const std::vector<LowRankIteration>& trace) {
  std::string out = "# choiforge-lowrank-trace v1\niteration,fidelity,constraint_residual,gram_min_eig,step,eig_offset\n";
  for (const LowRankIteration& r : trace) {
    out += std::to_string(r.iteration) + "," + fmt(r.fidelity) + "," + fmt(r.constraint_residual) + "," +
           fmt(r.gram_min_eig) + "," + fmt(r.step) + "," + std::to_string(r.eig_offset) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// classical data
//
// CSV with a header row naming every column "x:<name>" or "f:<name>"; the x
// columns form the input vector and the f columns the output vector.

struct ClassicalData {
  std::vector<Vector> xs;
  std::vector<Vector> fs;
};

inline ClassicalData classical_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) {
      const auto a = cell.find_first_not_of(" \t\r");
      const auto b = cell.find_last_not_of(" \t\r");
      cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    return cells;
  };
  std::vector<int> role;  // 0 = x, 1 = f
  ClassicalData out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const std::vector<std::string> cells = split(line);
    if (role.empty()) {
      for (const std::string& c : cells) {
        if (c.rfind("x:", 0) == 0) {
          role.push_back(0);
        } else if (c.rfind("f:", 0) == 0) {
          role.push_back(1);
        } else {
          fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": header column \"" + c +
                                     "\" must start with x: or f:");
        }
      }
      if (std::count(role.begin(), role.end(), 0) == 0 || std::count(role.begin(), role.end(), 1) == 0) {
        fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": header needs at least one x: and one f: column");
      }
      continue;
    }
    if (cells.size() != role.size()) {
      fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected " + std::to_string(role.size()) + " cells");
    }
    std::vector<double> x, f;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0;
      std::size_t used = 0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[c].size() || cells[c].empty() || !std::isfinite(v)) {
        fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": cell " + std::to_string(c + 1) + " is not a number");
      }
      (role[c] == 0 ? x : f).push_back(v);
    }
    out.xs.push_back(Eigen::Map<Vector>(x.data(), static_cast<Index>(x.size())));
    out.fs.push_back(Eigen::Map<Vector>(f.data(), static_cast<Index>(f.size())));
  }
  if (out.xs.empty()) fail(ErrorKind::Parse, "classical CSV has no data rows");
  return out;
}

}  // namespace choiforge::io
