#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace preempt {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the named substream `name` of `master` (e.g. "data", "train",
/// "study/p3/r1/c4").
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
  return splitmix64(splitmix64(master) ^ fnv1a(name));
}

inline std::mt19937_64 substream(std::uint64_t master, std::string_view name) {
  return std::mt19937_64(derive_seed(master, name));
}

}  // namespace preempt
