#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfloop {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream key from a base seed and a path of indices,
/// e.g. (master, block, replicate) or (network seed, layer). Order of the
/// path matters; distinct paths give unrelated keys.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t key = mix64(base);
  for (std::uint64_t p : path) key = mix64(key ^ mix64(p + 0x632be59bd9b4e019ULL));
  return key;
}

/// Engine for one leaf of the seed tree.
inline std::mt19937_64 make_engine(std::uint64_t key) {
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  return std::mt19937_64(seq);
}

/// Seed blocks of one experiment; each Monte-Carlo ensemble draws from its own block.
enum class SeedBlock : std::uint64_t {
  dataset = 1,
  empirical = 2,
  mean = 3,
  contraction = 4,
};

inline std::uint64_t block_seed(std::uint64_t master, SeedBlock block) {
  return derive_seed(master, {static_cast<std::uint64_t>(block)});
}

inline std::uint64_t replicate_seed(std::uint64_t block_key, std::uint64_t replicate) {
  return derive_seed(block_key, {replicate});
}

}  // namespace rfloop
