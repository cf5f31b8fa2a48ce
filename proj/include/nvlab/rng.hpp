#pragma once

#include <cstdint>
#include <random>

namespace nvlab {

// Uniform draw in [0, n) via rejection sampling. std::uniform_int_distribution
// is implementation-defined, and campaign artifacts must be byte-identical
// across toolchains, so the bounding is done by hand.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace nvlab
