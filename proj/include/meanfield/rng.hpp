#pragma once

#include "meanfield/types.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace meanfield {

/// Seeded random source. The raw stream is std::mt19937_64, whose output
/// sequence is fully specified by the standard, and all variate transforms
/// are implemented here explicitly (the standard distributions are not
/// implementation-portable). Identical seed therefore means an identical
/// stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  Scalar uniform01() { return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Modulo reduction; the bias is ~n/2^64.
  std::uint64_t uniform_index(std::uint64_t n) { return engine_() % n; }

  /// Standard normal via Box-Muller (two uniforms consumed, one variate
  /// returned, no cached spare -- keeps the stream position well defined).
  Scalar normal() {
    const Scalar u1 = static_cast<Scalar>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const Scalar u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Scalar normal(Scalar mean, Scalar stddev) { return mean + stddev * normal(); }

  /// Fills row-major (row by row, left to right).
  void fill_normal(Matrix& m, Scalar stddev) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = stddev * normal();
  }

  std::string state_string() const;
  void set_state(const std::string& state);

  /// Derives an independent stream seed from (seed, stream index); splitmix64
  /// finalizer over the xor of the two.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed ^ (stream + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr Scalar kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

}  // namespace meanfield
