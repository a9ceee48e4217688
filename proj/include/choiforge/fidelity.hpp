#pragma once

// Fidelity tensors built from mapping samples and the quadratic / ratio
// forms of the total fidelity.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "choiforge/channel.hpp"
#include "choiforge/error.hpp"
#include "choiforge/linalg.hpp"

namespace choiforge {

using StateVariant = std::variant<PureState, DensityMatrix>;

inline Index state_dim(const StateVariant& s) {
  return std::visit([](const auto& v) { return v.dim(); }, s);
}

inline SymMatrix state_density(const StateVariant& s) {
  if (const auto* p = std::get_if<PureState>(&s)) {
    const Vector& v = p->amplitudes();
    return SymMatrix::from_symmetric(v * v.transpose());
  }
  return std::get<DensityMatrix>(s).matrix();
}

/// One observation rho -> phi with fidelity weight omega and denominator
/// weight nu.
struct MappingRecord {
  StateVariant input;
  StateVariant output;
  double omega = 1.0;
  double nu = 1.0;

  MappingRecord(StateVariant in, StateVariant out, double w = 1.0)
      : input(std::move(in)), output(std::move(out)), omega(w), nu(w) {}
  MappingRecord(StateVariant in, StateVariant out, double w, double denom_w)
      : input(std::move(in)), output(std::move(out)), omega(w), nu(denom_w) {}
};

class MappingSample {
 public:
  MappingSample() = default;

  explicit MappingSample(std::vector<MappingRecord> records, std::optional<std::uint64_t> seed = std::nullopt)
      : records_(std::move(records)), seed_(seed) {
    require(!records_.empty(), ErrorKind::InvalidInput, "mapping sample is empty");
    d_in_ = state_dim(records_.front().input);
    d_out_ = state_dim(records_.front().output);
    for (std::size_t l = 0; l < records_.size(); ++l) {
      const MappingRecord& r = records_[l];
      require(state_dim(r.input) == d_in_ && state_dim(r.output) == d_out_, ErrorKind::DimensionMismatch,
              "record " + std::to_string(l) + " has inconsistent dimensions");
      require(std::isfinite(r.omega) && r.omega >= 0.0 && std::isfinite(r.nu) && r.nu >= 0.0,
              ErrorKind::InvalidInput, "record " + std::to_string(l) + " has an invalid weight");
    }
  }

  const std::vector<MappingRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  Index d_in() const { return d_in_; }
  Index d_out() const { return d_out_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  double total_omega() const {
    double t = 0;
    for (const auto& r : records_) t += r.omega;
    return t;
  }
  double total_nu() const {
    double t = 0;
    for (const auto& r : records_) t += r.nu;
    return t;
  }

 private:
  std::vector<MappingRecord> records_;
  Index d_in_ = 0;
  Index d_out_ = 0;
  std::optional<std::uint64_t> seed_;
};

struct FidelityTensor {
  Index d_out = 0;
  Index d_in = 0;
  SymMatrix s;

  FidelityTensor() = default;
  FidelityTensor(Index d, Index n, SymMatrix m) : d_out(d), d_in(n), s(std::move(m)) {
    require(s.dim() == d * n, ErrorKind::DimensionMismatch, "fidelity tensor dimension != D*n");
  }
  Index dim() const { return s.dim(); }
};

/// Q_{jk;j'k'} = delta_{jj'} W_{kk'}.
struct DenominatorTensor {
  Index d_out = 0;
  Index d_in = 0;
  SymMatrix q;

  DenominatorTensor() = default;
  DenominatorTensor(Index d, Index n, SymMatrix m) : d_out(d), d_in(n), q(std::move(m)) {
    require(q.dim() == d * n, ErrorKind::DimensionMismatch, "denominator tensor dimension != D*n");
  }
  Index dim() const { return q.dim(); }
};

namespace detail {

// Accumulates sum_l omega_l * out_l (x) in_l, with pure records batched into
// one dense rank-k update.
template <class OutDensity>
SymMatrix accumulate_s(const MappingSample& sample, OutDensity&& out_density) {
  const Index n = sample.d_in(), d = sample.d_out(), dim = d * n;
  Matrix s = Matrix::Zero(dim, dim);
  std::vector<Vector> pure_cols;
  for (const MappingRecord& r : sample.records()) {
    if (r.omega == 0.0) continue;
    const auto* pin = std::get_if<PureState>(&r.input);
    const auto* pout = std::get_if<PureState>(&r.output);
    if (pin && pout) {
      Vector v(dim);
      for (Index j = 0; j < d; ++j) v.segment(j * n, n) = (*pout)(j) * pin->amplitudes();
      pure_cols.push_back(std::sqrt(r.omega) * v);
      continue;
    }
    s += r.omega * kron(out_density(r.output).matrix(), state_density(r.input).matrix());
  }
  if (!pure_cols.empty()) {
    Matrix v(dim, static_cast<Index>(pure_cols.size()));
    for (std::size_t c = 0; c < pure_cols.size(); ++c) v.col(static_cast<Index>(c)) = pure_cols[c];
    s.selfadjointView<Eigen::Lower>().rankUpdate(v);
    s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  }
  return SymMatrix(s);
}

}  // namespace detail

/// S_{jk;j'k'} = sum_l omega_l phi_j phi_j' rho_kk'. Outputs must be pure.
inline FidelityTensor build_s(const MappingSample& sample) {
  for (std::size_t l = 0; l < sample.size(); ++l) {
    require(std::holds_alternative<PureState>(sample.records()[l].output), ErrorKind::InvalidInput,
            "build_s: record " + std::to_string(l) + " has a mixed output; use build_s_mixed_out");
  }
  return FidelityTensor(sample.d_out(), sample.d_in(), detail::accumulate_s(sample, state_density));
}

/// S_{jk;j'k'} = sum_l omega_l varrho_jj' rho_kk'. Tr(J S) is the true total
/// fidelity only when, per record, the target or the produced state is pure.
inline FidelityTensor build_s_mixed_out(const MappingSample& sample) {
  return FidelityTensor(sample.d_out(), sample.d_in(), detail::accumulate_s(sample, state_density));
}

/// Q_{jk;j'k'} = delta_{jj'} sum_l nu_l rho_kk'.
inline DenominatorTensor build_q(const MappingSample& sample) {
  const Index n = sample.d_in(), d = sample.d_out();
  Matrix w = Matrix::Zero(n, n);
  for (const MappingRecord& r : sample.records()) {
    if (r.nu == 0.0) continue;
    w += r.nu * state_density(r.input).matrix();
  }
  return DenominatorTensor(d, n, SymMatrix(kron(Matrix::Identity(d, d), w)));
}

inline void check_dims(const KrausSet& ch, Index d_out, Index d_in, const char* what) {
  require(ch.d_out() == d_out && ch.d_in() == d_in, ErrorKind::DimensionMismatch,
          std::string(what) + ": channel is " + std::to_string(ch.d_out()) + "x" + std::to_string(ch.d_in()) +
              ", tensor is " + std::to_string(d_out) + "x" + std::to_string(d_in));
}

inline double quadratic_form(const KrausSet& ch, const SymMatrix& t) {
  const Matrix v = ch.stacked();
  return (v.transpose() * t.matrix() * v).trace();
}

inline double fidelity_kraus(const KrausSet& ch, const FidelityTensor& s) {
  check_dims(ch, s.d_out, s.d_in, "fidelity_kraus");
  return quadratic_form(ch, s.s);
}

inline double fidelity_choi(const ChoiMatrix& j, const FidelityTensor& s) {
  require(j.d_out() == s.d_out && j.d_in() == s.d_in, ErrorKind::DimensionMismatch, "fidelity_choi: dimension mismatch");
  return trace_inner(j.j(), s.s);
}

inline double fidelity_ratio(const KrausSet& ch, const FidelityTensor& s, const DenominatorTensor& q) {
  check_dims(ch, s.d_out, s.d_in, "fidelity_ratio");
  check_dims(ch, q.d_out, q.d_in, "fidelity_ratio");
  const double num = quadratic_form(ch, s.s);
  const double den = quadratic_form(ch, q.q);
  const Matrix v = ch.stacked();
  const double scale = q.q.frobenius_norm() * v.squaredNorm();
  if (!(den > 1e-14 * scale) || !(den > 0.0)) {
    fail(ErrorKind::DegenerateDenominator, "fidelity_ratio: denominator " + std::to_string(den) + " is zero");
  }
  return num / den;
}

/// <phi| varrho |phi>.
inline double expected_pair_fidelity(const DensityMatrix& out, const PureState& target) {
  require(out.dim() == target.dim(), ErrorKind::DimensionMismatch, "expected_pair_fidelity: dimension mismatch");
  const Vector& v = target.amplitudes();
  return v.dot(out.matrix().matrix() * v);
}

}  // namespace choiforge
