#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wafer {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a path of
// integers, e.g. derive_seed(seed, {class, index}). Each component is folded
// in with mix64 so that the seed of (class c, item i) does not depend on how
// many items other classes have.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(base);
  for (std::uint64_t p : path) {
    h = mix64(h ^ mix64(p + 0x632BE59BD9B4E019ULL));
  }
  return h;
}

}  // namespace wafer
