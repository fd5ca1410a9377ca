#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rtic {

using Rng = std::mt19937_64;

// 64-bit FNV-1a. Used for stream naming and config hashes, where a stable
// value across runs and platforms matters more than distribution quality.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent generator for a named sub-stream ("data", "init", "shuffle",
// "tpe") of one master seed.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t tag = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

// splitmix64 finalizer over a combination of two values; used to derive
// per-item seeds (e.g. caption order per epoch and triplet).
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace rtic
