#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace fjsp {

// Portable draws on top of std::mt19937_64. The standard distributions are
// implementation-defined, so generated instances and sampled trajectories
// would differ across standard libraries if we used them.
using Rng = std::mt19937_64;

/// Uniform integer in [lo, hi], unbiased (rejection sampling).
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(rng());  // full 64-bit range
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return lo + static_cast<std::int64_t>(draw % span);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Mixes a base seed with stream identifiers (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

}  // namespace fjsp
