// SPDX-License-Identifier: Apache-2.0
#include "qmimo/rng.hpp"

#include <cmath>

namespace qmimo {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

inline std::uint64_t splitmix_next(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  std::uint64_t s = x;
  return splitmix_next(s);
}

SplitRng::SplitRng(std::uint64_t seed,
                   std::initializer_list<std::uint64_t> stream) {
  // Absorb the stream words into the seed, one hash step per word, then
  // expand into the xoshiro state. Distinct tuples give distinct states.
  std::uint64_t key = mix64(seed);
  for (std::uint64_t w : stream) {
    key = mix64(key ^ mix64(w + 0x632BE59BD9B4E019ULL));
  }
  std::uint64_t expander = key;
  for (auto& s : state_) {
    s = splitmix_next(expander);
  }
  // xoshiro must not start from the all-zero state.
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
    state_[0] = 0x9E3779B97F4A7C15ULL;
  }
}

std::uint64_t SplitRng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double SplitRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

void SplitRng::next_gaussian_pair(double& g0, double& g1) {
  // 1 - u is in (0, 1], so the log is finite.
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  g0 = radius * std::cos(angle);
  g1 = radius * std::sin(angle);
}

std::complex<double> SplitRng::next_cgaussian(double variance) {
  double g0 = 0.0;
  double g1 = 0.0;
  next_gaussian_pair(g0, g1);
  const double scale = std::sqrt(0.5 * variance);
  return {scale * g0, scale * g1};
}

}  // namespace qmimo
