#pragma once

#include <cstdint>
#include <string_view>

namespace lshbloom {

// Stable 64-bit mixing primitives. Every persisted value (shingle
// fingerprints, hash family parameters, filter seeds) is derived from these,
// so they must never change.

/// Finalizer of SplitMix64 (Steele, Lea, Flood).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// Counter-mode SplitMix64: the `counter`-th output of the stream started at
/// `seed`. Random access, so any prefix of a stream is reproducible alone.
constexpr std::uint64_t splitmix_at(std::uint64_t seed, std::uint64_t counter) noexcept {
  return mix64(seed + (counter + 1) * kGoldenGamma);
}

/// Seed for the `index`-th child of `seed` in a named domain. Domains keep
/// streams used for different purposes from overlapping.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(seed ^ mix64(domain)) + index * kGoldenGamma);
}

/// Fingerprint of a byte string: FNV-1a 64 over the bytes, then the
/// SplitMix64 finalizer for avalanche. Platform independent.
constexpr std::uint64_t fingerprint64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

}  // namespace lshbloom
