#pragma once

#include <cstdint>
#include <random>

namespace pskd {

/// All randomness flows through explicitly passed engines; nothing global.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic per-trial seed derivation: trial i of a run seeded with
/// `master` always gets the same stream, independent of scheduling.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x9e3779b97f4a7c15ull));
}

}  // namespace pskd
