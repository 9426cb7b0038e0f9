#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nirvis {

// splitmix64 finalizer; good avalanche, stable across platforms.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// One global seed fans out to independent per-component streams. Adding a
// component never perturbs the streams of existing ones.
inline std::uint64_t split_seed(std::uint64_t global_seed, std::string_view component) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the component id
  for (char c : component) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return mix64(global_seed ^ mix64(h));
}

inline std::uint64_t split_seed(std::uint64_t global_seed, std::string_view component,
                                std::uint64_t index) {
  return mix64(split_seed(global_seed, component) ^ mix64(index));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace nirvis
