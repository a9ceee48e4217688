#pragma once

// Seeded generators for the experimental samples, and the transform of
// classical vector-to-vector data into a wavefunction mapping.
//
// "Random" vectors and matrices use coordinates uniform on [-1, 1]; random
// unit vectors normalize such a vector (not rotation invariant).

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "choiforge/channel.hpp"
#include "choiforge/error.hpp"
#include "choiforge/fidelity.hpp"
#include "choiforge/linalg.hpp"
#include "choiforge/rng.hpp"

namespace choiforge {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform_pm1();
  return m;
}

inline PureState random_unit_vector(Index dim, Rng& rng) {
  for (;;) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = rng.uniform_pm1();
    if (v.norm() > 1e-8) return PureState::normalized(v);
  }
}

/// Default sample size at desk scale: min(2 n^2 D^2 + 1000, 20000).
inline Index default_sample_size(Index n, Index d) {
  return std::min<Index>(2 * n * n * d * d + 1000, 20000);
}

/// Q factor of a random matrix, with R's diagonal made positive.
inline Matrix random_orthogonal(Index n, Rng& rng) {
  for (;;) {
    Matrix a = random_matrix(n, n, rng);
    auto [q, r] = qr(a);
    if (r.diagonal().cwiseAbs().minCoeff() > 1e-8) return q;
  }
}

/// random_orthogonal with the first column negated when needed so that
/// det = +1. In even dimension a det = -1 matrix has a reflection block, on
/// which the trajectory repeats with period two. U is still the unique
/// optimum there, but the SDP optimum is not strictly complementary and the
/// recovered operator is only accurate to about the square root of the gap.
inline Matrix random_rotation(Index n, Rng& rng) {
  Matrix q = random_orthogonal(n, rng);
  if (q.determinant() < 0) q.col(0) = -q.col(0);
  return q;
}

/// Records (+-X_l, +-X_{l+1}) along the trajectory X_{l+1} = U X_l, with
/// independent random signs and omega = 1. A random X_0 is drawn when x0 is
/// not given.
inline MappingSample unitary_dynamics_sample(const Matrix& u, std::optional<PureState> x0, Index m, Rng& rng) {
  require(u.rows() == u.cols(), ErrorKind::InvalidInput, "unitary_dynamics_sample: U must be square");
  require((u.transpose() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= 1e-10,
          ErrorKind::InvalidInput, "unitary_dynamics_sample: U is not orthogonal");
  require(m >= 1, ErrorKind::InvalidInput, "unitary_dynamics_sample: need m >= 1");
  PureState x = x0 ? *x0 : random_unit_vector(u.rows(), rng);
  require(x.dim() == u.rows(), ErrorKind::DimensionMismatch, "unitary_dynamics_sample: X0 dimension mismatch");
  std::vector<MappingRecord> records;
  records.reserve(static_cast<std::size_t>(m));
  for (Index l = 0; l < m; ++l) {
    PureState next = PureState::normalized(u * x.amplitudes());
    const double si = rng.sign(), so = rng.sign();
    records.emplace_back(PureState(Vector(si * x.amplitudes())), PureState(Vector(so * next.amplitudes())), 1.0);
    x = std::move(next);
  }
  return MappingSample(std::move(records));
}

/// Independent random unit pairs psi (dim n) -> phi (dim D), omega = 1.
inline MappingSample random_pair_sample(Index n, Index d, Index m, Rng& rng) {
  std::vector<MappingRecord> records;
  records.reserve(static_cast<std::size_t>(m));
  for (Index l = 0; l < m; ++l) {
    PureState psi = random_unit_vector(n, rng);
    PureState phi = random_unit_vector(d, rng);
    records.emplace_back(std::move(psi), std::move(phi), 1.0);
  }
  return MappingSample(std::move(records));
}

/// Random Kraus operators with coordinates in [-1, 1], made trace preserving
/// by the G^{-1/2} transform. Redraws on a singular Gram.
inline KrausSet random_tp_channel(Index n, Index d, Index n_s, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Matrix> ops;
    for (Index s = 0; s < n_s; ++s) ops.push_back(random_matrix(d, n, rng));
    try {
      return adjust_tp(KrausSet(d, n, std::move(ops)), 1e-10);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularGram) throw;
    }
  }
  fail(ErrorKind::SingularGram, "random_tp_channel: could not draw a channel with nonsingular Gram");
}

/// Kraus rank one, D > n, trace preserving (an isometry).
inline KrausSet toy_channel(Index n, Index d, Rng& rng) {
  require(d > n, ErrorKind::InvalidInput, "toy_channel: requires D > n");
  return random_tp_channel(n, d, 1, rng);
}

struct ChannelSample {
  MappingSample sample;
  double f_init = 0;  // fidelity of the generating channel on the sample
};

/// psi random; phi the top eigenvector of ch(psi psi^T).
inline ChannelSample channel_maxeig_sample(const KrausSet& ch, Index m, Rng& rng) {
  std::vector<MappingRecord> records;
  records.reserve(static_cast<std::size_t>(m));
  double f_init = 0;
  for (Index l = 0; l < m; ++l) {
    PureState psi = random_unit_vector(ch.d_in(), rng);
    DensityMatrix out = apply_kraus(ch, DensityMatrix::from_pure(psi));
    EigDecomposition e = sym_eig(out.matrix());
    Vector top = e.vectors.col(e.values.size() - 1);
    fix_sign(top);
    f_init += e.values(e.values.size() - 1);
    records.emplace_back(std::move(psi), PureState::normalized(top), 1.0);
  }
  return {MappingSample(std::move(records)), f_init};
}

struct ProjectiveSample {
  MappingSample sample;
  Matrix p;  // D x n, orthonormal rows
};

/// phi = P psi / |P psi| with P the first D rows of a random orthogonal
/// matrix; omega = nu = 1.
inline ProjectiveSample projective_sample(Index n, Index d, Index m, Rng& rng) {
  require(d >= 1 && d <= n, ErrorKind::InvalidInput, "projective_sample: requires 1 <= D <= n");
  Matrix p = random_orthogonal(n, rng).topRows(d);
  std::vector<MappingRecord> records;
  records.reserve(static_cast<std::size_t>(m));
  while (static_cast<Index>(records.size()) < m) {
    PureState psi = random_unit_vector(n, rng);
    Vector proj = p * psi.amplitudes();
    if (proj.norm() < 1e-8) continue;
    records.emplace_back(std::move(psi), PureState::normalized(proj), 1.0, 1.0);
  }
  return {MappingSample(std::move(records)), p};
}

/// Symmetric Dn x Dn matrix with entries uniform on [-1, 1].
inline FidelityTensor random_s_matrix(Index n, Index d, Rng& rng) {
  const Index dim = d * n;
  Matrix s(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j <= i; ++j) {
      s(i, j) = rng.uniform_pm1();
      s(j, i) = s(i, j);
    }
  return FidelityTensor(d, n, SymMatrix::from_symmetric(std::move(s)));
}

namespace detail {

// Rows of the result are G^{-1/2} v / sqrt(v^T G^{-1} v), the coordinates of
// the normalized localized state in an orthonormal basis of the Gram inner
// product.
inline std::vector<Vector> localized_states(const std::vector<Vector>& vs, const char* what) {
  require(!vs.empty(), ErrorKind::InvalidInput, std::string(what) + ": no data");
  const Index dim = vs.front().size();
  Matrix g = Matrix::Zero(dim, dim);
  for (const Vector& v : vs) {
    require(v.size() == dim && v.allFinite(), ErrorKind::InvalidInput, std::string(what) + ": ragged or non-finite data");
    g += v * v.transpose();
  }
  g /= static_cast<double>(vs.size());
  SymMatrix w;
  try {
    w = inv_sqrt_psd(SymMatrix(g), 1e-12);
  } catch (const Error&) {
    fail(ErrorKind::DegenerateData, std::string(what) + ": Gram matrix of the data is singular");
  }
  std::vector<Vector> out;
  out.reserve(vs.size());
  for (const Vector& v : vs) {
    Vector a = w.matrix() * v;
    const double nrm = a.norm();  // sqrt(v^T G^{-1} v)
    if (!(nrm > 0.0)) fail(ErrorKind::DegenerateData, std::string(what) + ": zero data vector");
    out.push_back(a / nrm);
  }
  return out;
}

}  // namespace detail

/// Converts x^(l) -> f^(l) into psi^(l) -> phi^(l) with omega = 1.
inline MappingSample classical_transform(const std::vector<Vector>& xs, const std::vector<Vector>& fs) {
  require(xs.size() == fs.size(), ErrorKind::InvalidInput, "classical_transform: x and f counts differ");
  std::vector<Vector> psi = detail::localized_states(xs, "classical_transform(x)");
  std::vector<Vector> phi = detail::localized_states(fs, "classical_transform(f)");
  std::vector<MappingRecord> records;
  records.reserve(xs.size());
  for (std::size_t l = 0; l < xs.size(); ++l)
    records.emplace_back(PureState::normalized(psi[l]), PureState::normalized(phi[l]), 1.0);
  return MappingSample(std::move(records));
}

}  // namespace choiforge
