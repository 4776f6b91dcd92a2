#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "lshbloom/bloom.hpp"
#include "lshbloom/bytes.hpp"
#include "lshbloom/error.hpp"
#include "lshbloom/lsh.hpp"

namespace lshbloom {

/// Chance that at least one of `bands` independent filters, each with
/// false-positive rate p, reports a false positive: 1 - (1 - p)^b.
inline double effective_fp(double per_filter_p, std::size_t bands) {
  require(per_filter_p >= 0.0 && per_filter_p < 1.0, ErrorCode::kInvalidArgument,
          "per-filter false-positive rate must be in [0, 1)");
  require(bands >= 1, ErrorCode::kInvalidArgument, "bands must be >= 1");
  return -std::expm1(static_cast<double>(bands) * std::log1p(-per_filter_p));
}

/// Inverse of effective_fp: 1 - (1 - p_eff)^(1/b), stable for tiny p_eff.
inline double per_filter_fp(double p_effective, std::size_t bands) {
  require(p_effective > 0.0 && p_effective < 1.0, ErrorCode::kInvalidArgument,
          "effective false-positive rate must be in (0, 1)");
  require(bands >= 1, ErrorCode::kInvalidArgument, "bands must be >= 1");
  if (bands == 1) return p_effective;
  const double p = -std::expm1(std::log1p(-p_effective) / static_cast<double>(bands));
  require(p > 0.0 && p < 1.0, ErrorCode::kInvalidArgument,
          "per-filter false-positive rate is not representable");
  return p;
}

inline constexpr double kBytesPerGB = 1e9;
inline constexpr double kBytesPerTB = 1e12;

/// Analytic size of an LSHBloom index.
struct CapacityPlan {
  std::uint64_t n_docs = 0;
  double p_effective = 0.0;
  double threshold = 0.0;
  std::size_t num_perm = 0;
  std::size_t bands = 0;
  std::size_t rows = 0;
  double per_filter_p = 0.0;
  std::uint64_t per_filter_bits = 0;
  std::uint32_t per_filter_probes = 0;
  std::uint64_t total_bytes = 0;     // b * ceil(m / 8): bit payload only
  std::uint64_t overhead_bytes = 0;  // container and per-filter headers/checksums

  std::uint64_t file_bytes() const { return total_bytes + overhead_bytes; }
  double total_gb() const { return static_cast<double>(total_bytes) / kBytesPerGB; }
  double total_tb() const { return static_cast<double>(total_bytes) / kBytesPerTB; }
};

namespace detail {
// magic, version, threshold, num_perm, b, r, signature_seed, band_hash_seed,
// n_docs, p_effective, doc_count
inline constexpr std::size_t kIndexHeaderBytes = 4 + 4 + 8 + 4 + 4 + 4 + 8 + 8 + 8 + 8 + 8;
inline constexpr std::uint64_t kFilterSeedDomain = 0x4c53484246494c54ULL;  // "LSHBFILT"
}  // namespace detail

inline CapacityPlan plan(const LshParams& params, std::uint64_t n_docs, double p_effective) {
  params.validate();
  require(n_docs >= 1, ErrorCode::kInvalidArgument, "n_docs must be >= 1");
  CapacityPlan out;
  out.n_docs = n_docs;
  out.p_effective = p_effective;
  out.threshold = params.threshold;
  out.num_perm = params.num_perm;
  out.bands = params.bands;
  out.rows = params.rows;
  out.per_filter_p = per_filter_fp(p_effective, params.bands);
  const BloomSize size = bloom_size(n_docs, out.per_filter_p);
  out.per_filter_bits = size.bits;
  out.per_filter_probes = size.probes;
  out.total_bytes = params.bands * ((size.bits + 7) / 8);
  out.overhead_bytes = detail::kIndexHeaderBytes + 4 +
                       params.bands * (BloomFilter::kHeaderBytes + BloomFilter::kChecksumBytes);
  return out;
}

/// Plans with the error-minimizing band layout for (threshold, num_perm).
inline CapacityPlan plan(std::uint64_t n_docs, double p_effective, double threshold,
                         std::size_t num_perm) {
  return plan(LshParams::optimal(threshold, num_perm), n_docs, p_effective);
}

/// Result of probing the index: which bands collided. Any collision makes the
/// document a duplicate.
struct BandCollisions {
  std::vector<std::uint32_t> bands;
  bool duplicate() const { return !bands.empty(); }
};

/// MinHashLSH index with one Bloom filter per band in place of bucket maps.
/// Stores no document ids, only band-hash membership.
///
/// query() may run concurrently with query(); insert() and query_then_insert()
/// take an exclusive lock, so concurrent query_then_insert calls serialize.
class LshBloomIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;
  static constexpr std::uint8_t kMagic[4] = {'L', 'S', 'H', 'B'};

  LshBloomIndex(const LshParams& params, std::uint64_t n_docs, double p_effective)
      : params_(params), hasher_(params), n_docs_(n_docs), p_effective_(p_effective) {
    const CapacityPlan cap = plan(params, n_docs, p_effective);
    filters_.reserve(params.bands);
    for (std::size_t j = 0; j < params.bands; ++j) {
      filters_.emplace_back(n_docs, cap.per_filter_p, filter_seed(params, j));
    }
  }

  LshBloomIndex(LshBloomIndex&&) noexcept = default;
  LshBloomIndex& operator=(LshBloomIndex&&) noexcept = default;

  const LshParams& params() const { return params_; }
  const BandHasher& hasher() const { return hasher_; }
  std::uint64_t capacity() const { return n_docs_; }
  double p_effective() const { return p_effective_; }
  std::uint64_t doc_count() const { return doc_count_; }
  const std::vector<BloomFilter>& filters() const { return filters_; }
  double per_filter_p() const { return filters_.front().target_p(); }

  void insert(const MinHashSignature& sig) { insert(std::span<const std::uint64_t>(hasher_.all(sig))); }

  void insert(std::span<const std::uint64_t> band_hashes) {
    check(band_hashes);
    std::unique_lock lock(*mutex_);
    for (std::size_t j = 0; j < filters_.size(); ++j) filters_[j].insert(band_hashes[j]);
    ++doc_count_;
  }

  BandCollisions query(const MinHashSignature& sig) const {
    return query(std::span<const std::uint64_t>(hasher_.all(sig)));
  }

  BandCollisions query(std::span<const std::uint64_t> band_hashes) const {
    check(band_hashes);
    std::shared_lock lock(*mutex_);
    BandCollisions out;
    for (std::size_t j = 0; j < filters_.size(); ++j) {
      if (filters_[j].contains(band_hashes[j])) out.bands.push_back(static_cast<std::uint32_t>(j));
    }
    return out;
  }

  /// Query, then insert, as one step. The first occurrence of any content is
  /// always reported unique.
  BandCollisions query_then_insert(const MinHashSignature& sig) {
    return query_then_insert(std::span<const std::uint64_t>(hasher_.all(sig)));
  }

  BandCollisions query_then_insert(std::span<const std::uint64_t> band_hashes) {
    check(band_hashes);
    std::unique_lock lock(*mutex_);
    for (std::size_t j = 0; j < filters_.size(); ++j) filters_[j].prefetch(band_hashes[j]);
    BandCollisions out;
    for (std::size_t j = 0; j < filters_.size(); ++j) {
      if (filters_[j].test_and_insert(band_hashes[j])) out.bands.push_back(static_cast<std::uint32_t>(j));
    }
    ++doc_count_;
    return out;
  }

  /// Exact size of serialize() output.
  std::size_t encoded_size() const {
    std::size_t total = detail::kIndexHeaderBytes + 4;
    for (const auto& f : filters_) total += f.encoded_size();
    return total;
  }

  std::vector<std::uint8_t> serialize() const {
    std::shared_lock lock(*mutex_);
    std::vector<std::uint8_t> out;
    out.reserve(encoded_size());
    bytes::Writer w(out);
    w.put_bytes(kMagic);
    w.put(kFormatVersion);
    w.put(params_.threshold);
    w.put(static_cast<std::uint32_t>(params_.num_perm));
    w.put(static_cast<std::uint32_t>(params_.bands));
    w.put(static_cast<std::uint32_t>(params_.rows));
    w.put(params_.signature_seed);
    w.put(params_.band_hash_seed);
    w.put(n_docs_);
    w.put(p_effective_);
    w.put(doc_count_);
    for (const auto& f : filters_) f.serialize_to(out);
    w.put(bytes::crc32c(out));
    return out;
  }

  static LshBloomIndex deserialize(std::span<const std::uint8_t> data) {
    bytes::Reader r(data);
    r.need(detail::kIndexHeaderBytes + 4);
    auto magic = r.take(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
      throw Error(ErrorCode::kBadMagic, "not an LSHBloom index (bad magic)");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "unsupported LSHBloom index version " + std::to_string(version));
    }
    const std::size_t body = data.size() - 4;
    bytes::Reader crc_reader(data, body);
    if (crc_reader.get<std::uint32_t>() != bytes::crc32c(data.first(body))) {
      throw Error(ErrorCode::kChecksumMismatch, "LSHBloom index checksum mismatch");
    }

    LshParams params;
    params.threshold = r.get<double>();
    params.num_perm = r.get<std::uint32_t>();
    params.bands = r.get<std::uint32_t>();
    params.rows = r.get<std::uint32_t>();
    params.signature_seed = r.get<std::uint64_t>();
    params.band_hash_seed = r.get<std::uint64_t>();
    const auto n_docs = r.get<std::uint64_t>();
    const auto p_effective = r.get<double>();
    const auto doc_count = r.get<std::uint64_t>();

    LshBloomIndex index;
    try {
      params.validate();
      index.params_ = params;
      index.hasher_ = BandHasher(params);
      index.n_docs_ = n_docs;
      index.p_effective_ = p_effective;
      index.doc_count_ = doc_count;
      const CapacityPlan cap = plan(params, n_docs, p_effective);
      std::size_t offset = r.offset();
      const auto filter_bytes = data.first(body);
      for (std::size_t j = 0; j < params.bands; ++j) {
        if (offset >= body) throw Error(ErrorCode::kTruncated, "index holds fewer filters than bands");
        BloomFilter f = BloomFilter::decode(filter_bytes, offset);
        if (f.capacity() != n_docs || f.target_p() != cap.per_filter_p ||
            f.seed() != filter_seed(params, j)) {
          throw Error(ErrorCode::kCorrupt, "filter " + std::to_string(j) + " does not match index params");
        }
        index.filters_.push_back(std::move(f));
      }
      if (offset != body) throw Error(ErrorCode::kCorrupt, "trailing bytes after last filter");
    } catch (const Error& e) {
      // Checksum already passed, so any inconsistency is a malformed writer.
      if (e.code() == ErrorCode::kCorrupt || e.code() == ErrorCode::kTruncated) throw;
      throw Error(ErrorCode::kCorrupt, std::string("inconsistent LSHBloom index: ") + e.what());
    }
    return index;
  }

  void save(const std::filesystem::path& path) const {
    const auto data = serialize();
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
      out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
      if (!out) throw Error(ErrorCode::kIo, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
  }

  static LshBloomIndex load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
    return deserialize(data);
  }

  /// Seed of band j's filter.
  static std::uint64_t filter_seed(const LshParams& params, std::size_t band) {
    return derive_seed(params.band_hash_seed, detail::kFilterSeedDomain, band);
  }

 private:
  LshBloomIndex() : hasher_(LshParams{0.5, 1, 1, 1, 0, 0}) {}

  void check(std::span<const std::uint64_t> band_hashes) const {
    require(band_hashes.size() == params_.bands, ErrorCode::kConfiguration,
            "band hash count does not match params");
  }

  LshParams params_;
  BandHasher hasher_;
  std::uint64_t n_docs_ = 0;
  double p_effective_ = 0.0;
  std::uint64_t doc_count_ = 0;
  std::vector<BloomFilter> filters_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
};

}  // namespace lshbloom
