#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace vleu::detail {

// Uniform integer in [0, bound) by modulo with rejection of the biased tail.
// Unlike std::uniform_int_distribution the sequence is identical on every
// standard library, since mt19937_64 output is fully specified.
inline std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = kMax - (kMax % bound + 1) % bound;
  std::uint64_t x = engine();
  while (x > limit) x = engine();
  return x % bound;
}

}  // namespace vleu::detail
