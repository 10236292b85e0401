#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gacdr {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent streams from one seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Rest... rest) {
  return derive_seed(mix64(seed ^ mix64(tag)), static_cast<std::uint64_t>(rest)...);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace gacdr
