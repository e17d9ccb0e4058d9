#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pvfl {

using Rng = std::mt19937_64;

/// Seed-derivation tree. Every random stream in a run is obtained as
///
///   experiment seed -> derive(seed, "<module>") -> derive(module, "<purpose>", round/client)
///
/// so that each stream is independent of how many draws any other stream made.
/// Stream tags in use:
///   "dataset", "validation", "partition", "model_init", "visibility",
///   "potential" (indexed by round, then client), "local" (round, then client),
///   "agent" (selection), "qnet_init", "projection", "replay".
namespace seeds {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive(std::uint64_t parent, std::string_view tag, std::uint64_t index = 0) {
  return splitmix64(splitmix64(parent ^ fnv1a(tag)) + index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace seeds
}  // namespace pvfl
