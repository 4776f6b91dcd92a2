#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "lshbloom/bytes.hpp"
#include "lshbloom/error.hpp"
#include "lshbloom/hash.hpp"

namespace lshbloom {

struct BloomSize {
  std::uint64_t bits = 0;    // m
  std::uint32_t probes = 0;  // k
  friend bool operator==(const BloomSize&, const BloomSize&) = default;
};

/// m = ceil(-n ln p / (ln 2)^2), k = max(1, round((m / n) ln 2)).
inline BloomSize bloom_size(std::uint64_t capacity, double target_p) {
  require(capacity >= 1, ErrorCode::kInvalidArgument, "capacity must be >= 1");
  require(target_p > 0.0 && target_p < 1.0, ErrorCode::kInvalidArgument,
          "false-positive rate must be in (0, 1)");
  const double ln2 = std::numbers::ln2;
  const double n = static_cast<double>(capacity);
  const double m = std::ceil(-n * std::log(target_p) / (ln2 * ln2));
  const double k = std::max(1.0, std::round(m / n * ln2));
  return {static_cast<std::uint64_t>(m), static_cast<std::uint32_t>(k)};
}

/// Probability that a fresh element tests positive after `inserted` inserts.
inline double bloom_false_positive_rate(std::uint64_t bits, std::uint32_t probes,
                                        std::uint64_t inserted) {
  const double fill = -std::expm1(-static_cast<double>(probes) * static_cast<double>(inserted) /
                                  static_cast<double>(bits));
  return std::pow(fill, probes);
}

/// Classic Bloom filter with Kirsch-Mitzenmacher double hashing:
///   g_j(x) = (h1(x) + j * h2(x)) mod m,  j = 0..k-1
/// h1 and h2 are SplitMix64 finalizations of x offset by two keys drawn from
/// the filter seed; the step h2 mod m is forced odd.
///
/// Bits are stored in 64-bit words; the last word's bits past m stay zero.
/// `insert` needs exclusive access.
class BloomFilter {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;
  static constexpr std::uint8_t kMagic[4] = {'L', 'B', 'F', '1'};
  // magic, version, seed, capacity, target_p, m, k, inserted
  static constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8 + 8 + 8 + 4 + 8;
  static constexpr std::size_t kChecksumBytes = 4;

  BloomFilter(std::uint64_t capacity, double target_p, std::uint64_t seed = 0)
      : seed_(seed), capacity_(capacity), target_p_(target_p) {
    const BloomSize size = bloom_size(capacity, target_p);
    bits_ = size.bits;
    probes_ = size.probes;
    words_.assign((bits_ + 63) / 64, 0);
    init_keys();
  }

  std::uint64_t bit_count() const { return bits_; }
  std::uint32_t probe_count() const { return probes_; }
  std::uint64_t capacity() const { return capacity_; }
  double target_p() const { return target_p_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t inserted() const { return inserted_; }
  bool oversubscribed() const { return inserted_ > capacity_; }

  std::uint64_t popcount() const {
    std::uint64_t total = 0;
    for (auto w : words_) total += static_cast<std::uint64_t>(std::popcount(w));
    return total;
  }

  void insert(std::uint64_t x) {
    for_each_probe(x, [this](std::uint64_t pos) { words_[pos >> 6] |= bit(pos); });
    ++inserted_;
  }

  bool contains(std::uint64_t x) const {
    Probe p = start(x);
    for (std::uint32_t j = 0; j < probes_; ++j) {
      if ((words_[p.pos >> 6] & bit(p.pos)) == 0) return false;
      advance(p);
    }
    return true;
  }

  /// contains() followed by insert(), computing probes once. Returns the
  /// membership answer from before the insert.
  bool test_and_insert(std::uint64_t x) {
    bool present = true;
    for_each_probe(x, [&](std::uint64_t pos) {
      std::uint64_t& w = words_[pos >> 6];
      present = present && (w & bit(pos)) != 0;
      w |= bit(pos);
    });
    ++inserted_;
    return present;
  }

  void prefetch(std::uint64_t x) const {
    for_each_probe(x, [this](std::uint64_t pos) { __builtin_prefetch(&words_[pos >> 6]); });
  }

  /// Exact size of `serialize()` output.
  std::size_t encoded_size() const { return kHeaderBytes + payload_bytes() + kChecksumBytes; }
  std::size_t payload_bytes() const { return static_cast<std::size_t>((bits_ + 7) / 8); }

  void serialize_to(std::vector<std::uint8_t>& out) const {
    const std::size_t begin = out.size();
    out.reserve(begin + encoded_size());
    bytes::Writer w(out);
    w.put_bytes(kMagic);
    w.put(kFormatVersion);
    w.put(seed_);
    w.put(capacity_);
    w.put(target_p_);
    w.put(bits_);
    w.put(probes_);
    w.put(inserted_);
    const std::size_t n = payload_bytes();
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(static_cast<std::uint8_t>(words_[i >> 3] >> (8 * (i & 7))));
    }
    w.put(bytes::crc32c(std::span(out).subspan(begin)));
  }

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out;
    serialize_to(out);
    return out;
  }

  /// Decodes one filter starting at `offset`; on success advances `offset`
  /// past it.
  static BloomFilter decode(std::span<const std::uint8_t> data, std::size_t& offset) {
    bytes::Reader r(data, offset);
    r.need(kHeaderBytes);
    auto magic = r.take(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
      throw Error(ErrorCode::kBadMagic, "not a Bloom filter encoding (bad magic)");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "unsupported Bloom filter format version " + std::to_string(version));
    }
    BloomFilter f;
    f.seed_ = r.get<std::uint64_t>();
    f.capacity_ = r.get<std::uint64_t>();
    f.target_p_ = r.get<double>();
    f.bits_ = r.get<std::uint64_t>();
    f.probes_ = r.get<std::uint32_t>();
    f.inserted_ = r.get<std::uint64_t>();
    // Checked before sizing the allocation from an untrusted m.
    if (f.bits_ / 8 > r.remaining()) {
      throw Error(ErrorCode::kTruncated, "truncated Bloom filter payload");
    }
    auto payload = r.take(f.payload_bytes());
    const std::size_t crc_end = r.offset();
    const auto stored_crc = r.get<std::uint32_t>();
    if (stored_crc != bytes::crc32c(data.subspan(offset, crc_end - offset))) {
      throw Error(ErrorCode::kChecksumMismatch, "Bloom filter checksum mismatch");
    }
    const bool sane = f.capacity_ >= 1 && f.target_p_ > 0.0 && f.target_p_ < 1.0 &&
                      bloom_size(f.capacity_, f.target_p_) == BloomSize{f.bits_, f.probes_};
    if (!sane) throw Error(ErrorCode::kCorrupt, "Bloom filter header is inconsistent");
    f.words_.assign((f.bits_ + 63) / 64, 0);
    for (std::size_t i = 0; i < payload.size(); ++i) {
      f.words_[i >> 3] |= static_cast<std::uint64_t>(payload[i]) << (8 * (i & 7));
    }
    if (f.bits_ % 64 != 0 && (f.words_.back() >> (f.bits_ % 64)) != 0) {
      throw Error(ErrorCode::kCorrupt, "Bloom filter has bits set past m");
    }
    f.init_keys();
    offset = r.offset();
    return f;
  }

  /// Decodes a buffer holding exactly one filter.
  static BloomFilter deserialize(std::span<const std::uint8_t> data) {
    std::size_t offset = 0;
    BloomFilter f = decode(data, offset);
    if (offset != data.size()) throw Error(ErrorCode::kCorrupt, "trailing bytes after Bloom filter");
    return f;
  }

  friend bool operator==(const BloomFilter& a, const BloomFilter& b) {
    return a.seed_ == b.seed_ && a.capacity_ == b.capacity_ && a.target_p_ == b.target_p_ &&
           a.bits_ == b.bits_ && a.probes_ == b.probes_ && a.inserted_ == b.inserted_ &&
           a.words_ == b.words_;
  }

 private:
  struct Probe {
    std::uint64_t pos;
    std::uint64_t step;
  };

  BloomFilter() = default;

  void init_keys() {
    key1_ = splitmix_at(seed_, 0);
    key2_ = splitmix_at(seed_, 1);
  }

  static constexpr std::uint64_t bit(std::uint64_t pos) { return std::uint64_t{1} << (pos & 63); }

  Probe start(std::uint64_t x) const {
    const std::uint64_t h1 = mix64(x + key1_);
    const std::uint64_t h2 = mix64(x + key2_);
    std::uint64_t step = (h2 % bits_) | 1;
    if (step >= bits_) step = bits_ == 1 ? 0 : 1;
    return {h1 % bits_, step};
  }

  void advance(Probe& p) const {
    p.pos += p.step;
    if (p.pos >= bits_) p.pos -= bits_;
  }

  template <typename F>
  void for_each_probe(std::uint64_t x, F&& f) const {
    Probe p = start(x);
    for (std::uint32_t j = 0; j < probes_; ++j) {
      f(p.pos);
      advance(p);
    }
  }

  std::uint64_t seed_ = 0;
  std::uint64_t capacity_ = 0;
  double target_p_ = 0.0;
  std::uint64_t bits_ = 0;
  std::uint32_t probes_ = 0;
  std::uint64_t inserted_ = 0;
  std::uint64_t key1_ = 0;
  std::uint64_t key2_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace lshbloom
