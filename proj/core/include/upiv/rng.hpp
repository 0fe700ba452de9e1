#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace upiv {

using Rng = std::mt19937_64;

/// One round of the splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/**
 * Child seed for a keyed sub-stream: the master seed is absorbed first, then
 * each key in order, each step passing through splitmix64. Distinct key tuples
 * of equal length map to distinct seeds except with probability ~2^-64.
 */
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace upiv
