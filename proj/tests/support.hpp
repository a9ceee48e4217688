#pragma once

// Hand-rolled generators for property tests. Everything is driven by the
// library's counter-based Rng so failures reproduce from the printed seed.

#include <cstdint>
#include <vector>

#include "choiforge/channel.hpp"
#include "choiforge/fidelity.hpp"
#include "choiforge/linalg.hpp"
#include "choiforge/rng.hpp"

namespace testgen {

using namespace choiforge;

inline Matrix matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform_pm1();
  return m;
}

inline Vector vector(Index n, Rng& rng) { return matrix(n, 1, rng).col(0); }

inline SymMatrix symmetric(Index n, Rng& rng) { return SymMatrix(matrix(n, n, rng)); }

/// A A^T + shift I, well conditioned for shift ~ 1.
inline SymMatrix spd(Index n, Rng& rng, double shift = 1.0) {
  const Matrix a = matrix(n, n, rng);
  return SymMatrix(Matrix(a * a.transpose() + shift * Matrix::Identity(n, n)));
}

inline PureState unit(Index n, Rng& rng) {
  for (;;) {
    const Vector v = vector(n, rng);
    if (v.norm() > 1e-3) return PureState::normalized(v);
  }
}

inline DensityMatrix density(Index n, Rng& rng) {
  const Matrix a = matrix(n, n, rng);
  Matrix r = a * a.transpose();
  r /= r.trace();
  return DensityMatrix(SymMatrix(r));
}

inline KrausSet kraus(Index d, Index n, Index n_s, Rng& rng) {
  std::vector<Matrix> ops;
  for (Index s = 0; s < n_s; ++s) ops.push_back(matrix(d, n, rng));
  return KrausSet(d, n, std::move(ops));
}

/// Random sample with a mix of pure and mixed inputs and random weights.
inline MappingSample sample(Index n, Index d, Index m, Rng& rng, bool mixed_inputs = false) {
  std::vector<MappingRecord> recs;
  for (Index l = 0; l < m; ++l) {
    StateVariant in = (mixed_inputs && l % 2) ? StateVariant(density(n, rng)) : StateVariant(unit(n, rng));
    const double w = 0.5 + 0.5 * (rng.uniform_pm1() + 1.0);
    recs.emplace_back(std::move(in), unit(d, rng), w, 1.0 + 0.25 * rng.uniform_pm1());
  }
  return MappingSample(std::move(recs));
}

/// Direct four-index sum S_{jk;j'k'} = sum_l w phi_j phi_j' rho_kk'.
inline Matrix s_oracle(const MappingSample& sample) {
  const Index n = sample.d_in(), d = sample.d_out();
  Matrix s = Matrix::Zero(d * n, d * n);
  for (const MappingRecord& r : sample.records()) {
    const Matrix rho = state_density(r.input).matrix();
    const Matrix out = state_density(r.output).matrix();
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index jp = 0; jp < d; ++jp)
          for (Index kp = 0; kp < n; ++kp) s(j * n + k, jp * n + kp) += r.omega * out(j, jp) * rho(k, kp);
  }
  return s;
}

}  // namespace testgen
