// SPDX-License-Identifier: Apache-2.0
#include "auglab/rng.hpp"

#include <cmath>

#include "auglab/errors.hpp"

namespace auglab {

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw ContractError("uniform_int: empty range");
  const uint64_t range = uint64_t(hi) - uint64_t(lo) + 1;
  if (range == 0) return int64_t(next_u64());  // full 64-bit range
  const uint64_t threshold = (0 - range) % range;  // 2^64 mod range
  uint64_t v = next_u64();
  while (v < threshold) v = next_u64();
  return lo + int64_t(v % range);
}

double Rng::normal() {
  // u1 in (0,1] keeps the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace auglab
