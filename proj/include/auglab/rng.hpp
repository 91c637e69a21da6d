// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace auglab {

// Deterministic 64-bit generator (splitmix64). All randomness in the library
// flows through this type so results never depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [lo, hi], inclusive. Rejection-sampled.
  int64_t uniform_int(int64_t lo, int64_t hi);

  // [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes two draws per call.
  double normal();

  bool coin() { return (next_u64() & 1) != 0; }

  // Derives a decorrelated stream id from a base seed and a tag.
  static uint64_t mix(uint64_t a, uint64_t b) {
    Rng r(a ^ (b * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL));
    return r.next_u64();
  }

 private:
  uint64_t state_;
};

}  // namespace auglab
