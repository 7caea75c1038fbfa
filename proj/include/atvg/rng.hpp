#pragma once

#include <cmath>
#include <cstdint>

namespace atvg {

// splitmix64: portable, deterministic, allocation-free. State is the value;
// callers pass it by reference and own the stream.
inline std::uint64_t next_u64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform in [0, 1), 53-bit resolution.
inline double next_unit_double(std::uint64_t& state) {
  return static_cast<double>(next_u64(state) >> 11) * 0x1.0p-53;
}

// Unbiased uniform draw in [0, n) via rejection sampling.
inline std::uint64_t uniform_index(std::uint64_t& state, std::uint64_t n) {
  const std::uint64_t limit = ~0ULL - ~0ULL % n;
  std::uint64_t x = next_u64(state);
  while (x >= limit) x = next_u64(state);
  return x % n;
}

// Standard normal via Box-Muller (one value per call; cheap enough here).
inline double next_gaussian(std::uint64_t& state) {
  double u1 = next_unit_double(state);
  while (u1 <= 0.0) u1 = next_unit_double(state);
  const double u2 = next_unit_double(state);
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace atvg
