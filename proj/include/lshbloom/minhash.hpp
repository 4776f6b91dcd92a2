#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "lshbloom/error.hpp"
#include "lshbloom/hash.hpp"
#include "lshbloom/text.hpp"

namespace lshbloom {

/// Hash range for MinHash values and band hashes: the Mersenne prime 2^61 - 1.
inline constexpr std::uint64_t kMersennePrime = (std::uint64_t{1} << 61) - 1;

/// x mod (2^61 - 1) for any 64-bit x.
constexpr std::uint64_t reduce61(std::uint64_t x) noexcept {
  std::uint64_t r = (x & kMersennePrime) + (x >> 61);
  return r >= kMersennePrime ? r - kMersennePrime : r;
}

/// (a * x + b) mod P with a, x, b already in [0, P).
constexpr std::uint64_t mul_add_mod61(std::uint64_t a, std::uint64_t x, std::uint64_t b) noexcept {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * x;
  std::uint64_t r = (static_cast<std::uint64_t>(prod) & kMersennePrime) +
                    static_cast<std::uint64_t>(prod >> 61) + b;  // < 2^63
  r = (r & kMersennePrime) + (r >> 61);
  return r >= kMersennePrime ? r - kMersennePrime : r;
}

/// Carter-Wegman hash h(x) = (a x + b) mod P.
struct UniversalHash {
  std::uint64_t a = 1;
  std::uint64_t b = 0;

  constexpr std::uint64_t operator()(std::uint64_t x) const noexcept {
    return mul_add_mod61(a, reduce61(x), b);
  }

  friend constexpr bool operator==(const UniversalHash&, const UniversalHash&) = default;
};

/// A reproducible sequence of universal hash functions. Function i takes its
/// parameters from counters 2i and 2i+1 of a SplitMix64 stream at `seed`:
///   a_i = 1 + (splitmix_at(seed, 2i) mod (P - 1))
///   b_i = splitmix_at(seed, 2i + 1) mod P
/// so a family of size c is a prefix of every larger family with the same seed.
class UniversalHashFamily {
 public:
  UniversalHashFamily(std::uint64_t seed, std::size_t count) : seed_(seed) {
    require(count >= 1, ErrorCode::kInvalidArgument, "hash family size must be >= 1");
    a_.reserve(count);
    b_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      a_.push_back(1 + splitmix_at(seed, 2 * i) % (kMersennePrime - 1));
      b_.push_back(splitmix_at(seed, 2 * i + 1) % kMersennePrime);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return a_.size(); }
  UniversalHash operator[](std::size_t i) const { return {a_[i], b_[i]}; }

  std::span<const std::uint64_t> multipliers() const { return a_; }
  std::span<const std::uint64_t> offsets() const { return b_; }

  friend bool operator==(const UniversalHashFamily&, const UniversalHashFamily&) = default;

 private:
  std::uint64_t seed_;
  std::vector<std::uint64_t> a_;
  std::vector<std::uint64_t> b_;
};

inline UniversalHashFamily make_family(std::uint64_t seed, std::size_t count) {
  return UniversalHashFamily(seed, count);
}

/// values[i] is the minimum of hash function i over a document's shingles.
struct MinHashSignature {
  std::vector<std::uint64_t> values;
  std::uint64_t family_seed = 0;

  std::size_t num_perm() const { return values.size(); }
  friend bool operator==(const MinHashSignature&, const MinHashSignature&) = default;
};

/// Min-hash of a set of fingerprints under every function of the family.
/// The result does not depend on the order of `fingerprints`.
inline MinHashSignature minhash_signature(std::span<const std::uint64_t> fingerprints,
                                          const UniversalHashFamily& family) {
  if (fingerprints.empty()) throw Error(ErrorCode::kEmptyDocument, "empty document");
  const std::size_t k = family.size();
  MinHashSignature sig;
  sig.family_seed = family.seed();
  sig.values.assign(k, std::numeric_limits<std::uint64_t>::max());
  const std::uint64_t* a = family.multipliers().data();
  const std::uint64_t* b = family.offsets().data();
  std::uint64_t* out = sig.values.data();
  for (std::uint64_t fp : fingerprints) {
    const std::uint64_t x = reduce61(fp);
    for (std::size_t i = 0; i < k; ++i) {
      out[i] = std::min(out[i], mul_add_mod61(a[i], x, b[i]));
    }
  }
  return sig;
}

inline MinHashSignature minhash_signature(const ShingleSet& shingles,
                                          const UniversalHashFamily& family) {
  return minhash_signature(std::span<const std::uint64_t>(shingles.elements), family);
}

/// Fraction of positions at which the two signatures agree.
inline double estimate_jaccard(const MinHashSignature& s1, const MinHashSignature& s2) {
  require(s1.num_perm() == s2.num_perm(), ErrorCode::kConfiguration,
          "signatures differ in num_perm");
  require(s1.family_seed == s2.family_seed, ErrorCode::kConfiguration,
          "signatures come from different hash families");
  require(s1.num_perm() > 0, ErrorCode::kConfiguration, "empty signature");
  std::size_t equal = 0;
  for (std::size_t i = 0; i < s1.values.size(); ++i) equal += s1.values[i] == s2.values[i];
  return static_cast<double>(equal) / static_cast<double>(s1.num_perm());
}

}  // namespace lshbloom
