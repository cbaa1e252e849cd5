// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qmimo/rng.hpp"

using qmimo::SplitRng;

TEST_CASE("identical tuples give identical streams") {
  SplitRng a(42, {1, 2, 3});
  SplitRng b(42, {1, 2, 3});
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("distinct stream words give distinct streams") {
  SplitRng a(42, {1, 2, 3});
  SplitRng b(42, {1, 2, 4});
  SplitRng c(42, {1, 2});
  int same_ab = 0;
  int same_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    same_ab += va == b.next_u64();
    same_ac += va == c.next_u64();
  }
  CHECK(same_ab <= 1);
  CHECK(same_ac <= 1);
}

TEST_CASE("uniform doubles live in [0, 1)") {
  SplitRng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("complex gaussian has the requested variance") {
  SplitRng rng(123, {9});
  const int n = 200000;
  const double variance = 2.5;
  double sum_sq = 0.0;
  std::complex<double> sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> z = rng.next_cgaussian(variance);
    sum += z;
    sum_sq += std::norm(z);
  }
  // mean ~ CN(0, var/n); |mean| < 5 sigma
  CHECK(std::abs(sum / static_cast<double>(n)) <
        5.0 * std::sqrt(variance / n));
  CHECK(sum_sq / n == doctest::Approx(variance).epsilon(0.02));
}

TEST_CASE("stream values are frozen across releases") {
  // Determinism contract: these literals pin the generator's exact output;
  // a change here silently invalidates every stored experiment seed.
  SplitRng rng(1, {2, 3});
  const std::uint64_t expected[4] = {
      0xc32d20acaf56b28dULL,
      0x069bc1a8ce8943fdULL,
      0xe1b0026e91df908dULL,
      0x83f03ab9e9190cb5ULL,
  };
  for (std::uint64_t v : expected) {
    CHECK(rng.next_u64() == v);
  }

  SplitRng gauss(42, {7});
  const std::complex<double> z0 = gauss.next_cgaussian(1.0);
  const std::complex<double> z1 = gauss.next_cgaussian(1.0);
  CHECK(z0.real() == doctest::Approx(0.25941352498416281).epsilon(1e-15));
  CHECK(z0.imag() == doctest::Approx(-0.26617289611871409).epsilon(1e-15));
  CHECK(z1.real() == doctest::Approx(0.24850521197366293).epsilon(1e-15));
  CHECK(z1.imag() == doctest::Approx(0.83586741735918191).epsilon(1e-15));
}
