#pragma once

#include <cstdint>

namespace choiforge {

/// Counter-based splittable generator. Output i of a stream is
/// splitmix64_mix(key + i * golden), so the stream is a pure function of
/// (seed, position) and is identical on every platform.
///
/// Stream format version 1. Changing the mixing or the double conversion
/// changes every generated sample and must bump kVersion.
class Rng {
 public:
  static constexpr int kVersion = 1;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t seed_key() const { return key_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGolden);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [-1, 1).
  double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

  /// +1 or -1 with equal probability.
  double sign() { return (next_u64() >> 63) ? -1.0 : 1.0; }

  /// Independent substream; split(i) is a pure function of (this key, i) and
  /// does not advance this stream.
  Rng split(std::uint64_t stream) const {
    Rng r;
    r.key_ = mix(key_ ^ mix(stream + 0x3c6ef372fe94f82bULL));
    r.counter_ = 0;
    return r;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace choiforge
