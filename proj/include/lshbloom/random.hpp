#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace lshbloom {

// std::mt19937_64 output is fixed by the standard but the std distributions
// are not; these draws are spelled out so sampled corpora reproduce anywhere.

/// Uniform integer in [0, n) by rejection. n must be >= 1.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % n + 1) % n;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw > limit);
  return draw % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Moves a uniform sample of k elements (without replacement) to the front.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(items[i], items[i + uniform_below(rng, items.size() - i)]);
  }
}

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  partial_shuffle(items, items.size(), rng);
}

}  // namespace lshbloom
