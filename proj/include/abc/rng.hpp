#pragma once

#include <cstdint>
#include <random>

namespace abc {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one map task. Depends only on the run's master seed and the
/// task's logical position, never on which worker executes it.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t generation,
                                    std::uint64_t index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (generation * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (index * 0x8cb92ba72f3d8dd7ULL));
  return h;
}

inline Rng make_task_rng(std::uint64_t master, std::uint64_t generation,
                         std::uint64_t index) {
  return Rng(derive_seed(master, generation, index));
}

}  // namespace abc
