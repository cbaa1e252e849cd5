// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>

namespace qmimo {

/// Splittable deterministic random generator.
///
/// Every (seed, stream words...) tuple keys a statistically independent
/// xoshiro256++ stream via a SplitMix64 hash chain, so substreams such as
/// (realization, bs, ue) can be drawn in any order, or in parallel, and
/// always produce the same values. The generator is fully specified by
/// this file and does not depend on libstdc++ distribution internals,
/// which keeps draws identical across platforms and compilers.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : SplitRng(seed, {}) {}
  SplitRng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53 random bits.
  double next_double();

  /// Standard normal via Box-Muller. Consumes exactly two uniforms and
  /// returns both coordinates of the pair.
  void next_gaussian_pair(double& g0, double& g1);

  /// Circularly-symmetric complex Gaussian with E|x|^2 = variance.
  std::complex<double> next_cgaussian(double variance);

 private:
  std::uint64_t state_[4];
};

/// SplitMix64 finalizer; exposed for key derivation and content hashing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace qmimo
