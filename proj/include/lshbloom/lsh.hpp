#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lshbloom/error.hpp"
#include "lshbloom/minhash.hpp"

namespace lshbloom {

struct BandShape {
  std::size_t bands = 0;
  std::size_t rows = 0;
  friend bool operator==(const BandShape&, const BandShape&) = default;
};

/// Probability that two signatures with per-position agreement `s` share at
/// least one band.
inline double s_curve(double s, std::size_t bands, std::size_t rows) {
  return 1.0 - std::pow(1.0 - std::pow(s, static_cast<double>(rows)), static_cast<double>(bands));
}

namespace detail {

inline constexpr int kSimpsonIntervals = 1000;

// Composite Simpson weights/nodes on [lo, hi]; returns the weighted sum of f.
template <typename F>
double simpson(F&& f, double lo, double hi, int intervals = kSimpsonIntervals) {
  if (hi <= lo) return 0.0;
  const double h = (hi - lo) / intervals;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + i * h);
  }
  return sum * h / 3.0;
}

}  // namespace detail

/// Weighted false-positive area below the threshold plus false-negative area
/// above it, for one (bands, rows) choice.
inline double banding_error(double threshold, std::size_t bands, std::size_t rows,
                            double fp_weight, double fn_weight) {
  const double b = static_cast<double>(bands);
  const double r = static_cast<double>(rows);
  const double fp = detail::simpson(
      [&](double s) { return 1.0 - std::pow(1.0 - std::pow(s, r), b); }, 0.0, threshold);
  const double fn = detail::simpson(
      [&](double s) { return std::pow(1.0 - std::pow(s, r), b); }, threshold, 1.0);
  return fp_weight * fp + fn_weight * fn;
}

/// Exhaustive search over all (b, r) with b*r <= num_perm for the pair that
/// minimizes `banding_error`. Ties go to smaller b, then smaller r.
inline BandShape optimal_params(double threshold, std::size_t num_perm, double fp_weight = 0.5,
                                double fn_weight = 0.5) {
  require(threshold > 0.0 && threshold <= 1.0, ErrorCode::kInvalidArgument,
          "threshold must be in (0, 1]");
  require(num_perm >= 2, ErrorCode::kInvalidArgument, "num_perm must be >= 2");
  require(fp_weight >= 0.0 && fn_weight >= 0.0 && std::abs(fp_weight + fn_weight - 1.0) < 1e-9,
          ErrorCode::kInvalidArgument, "weights must be non-negative and sum to 1");
  BandShape best{};
  double best_error = std::numeric_limits<double>::infinity();
  for (std::size_t b = 1; b <= num_perm; ++b) {
    for (std::size_t r = 1; b * r <= num_perm; ++r) {
      const double e = banding_error(threshold, b, r, fp_weight, fn_weight);
      if (e < best_error) {
        best_error = e;
        best = {b, r};
      }
    }
  }
  return best;
}

/// Everything that determines index behavior.
struct LshParams {
  double threshold = 0.8;
  std::size_t num_perm = 128;
  std::size_t bands = 0;
  std::size_t rows = 0;
  std::uint64_t signature_seed = 1;
  std::uint64_t band_hash_seed = 2;

  static LshParams optimal(double threshold, std::size_t num_perm, std::uint64_t signature_seed = 1,
                           std::uint64_t band_hash_seed = 2, double fp_weight = 0.5,
                           double fn_weight = 0.5) {
    const BandShape shape = optimal_params(threshold, num_perm, fp_weight, fn_weight);
    LshParams p{threshold, num_perm, shape.bands, shape.rows, signature_seed, band_hash_seed};
    p.validate();
    return p;
  }

  void validate() const {
    require(threshold > 0.0 && threshold <= 1.0, ErrorCode::kConfiguration,
            "threshold must be in (0, 1]");
    require(num_perm >= 1, ErrorCode::kConfiguration, "num_perm must be >= 1");
    require(bands >= 1 && rows >= 1, ErrorCode::kConfiguration, "bands and rows must be >= 1");
    require(bands * rows <= num_perm, ErrorCode::kConfiguration, "bands * rows exceeds num_perm");
  }

  /// Signature rows beyond the last full band; never hashed.
  std::size_t ignored_rows() const { return num_perm - bands * rows; }

  friend bool operator==(const LshParams&, const LshParams&) = default;
};

/// Band hashes are b integers in [0, P): one per band.
using BandHashes = std::vector<std::uint64_t>;

/// Hashes the r values of a band to one integer: (sum_i h_i(x_i)) mod P.
/// The r functions come from `band_hash_seed` and are shared by all bands.
class BandHasher {
 public:
  explicit BandHasher(const LshParams& params)
      : params_(params), row_hashes_(params.band_hash_seed, params.rows) {
    params_.validate();
  }

  const LshParams& params() const { return params_; }

  std::uint64_t hash_band(std::span<const std::uint64_t> band) const {
    std::uint64_t sum = 0;
    const auto a = row_hashes_.multipliers();
    const auto b = row_hashes_.offsets();
    for (std::size_t i = 0; i < band.size(); ++i) {
      sum += mul_add_mod61(a[i], reduce61(band[i]), b[i]);  // each term < 2^61
      if (sum >= kMersennePrime) sum -= kMersennePrime;
    }
    return sum;
  }

  std::uint64_t operator()(const MinHashSignature& sig, std::size_t band_index) const {
    check(sig);
    require(band_index < params_.bands, ErrorCode::kInvalidArgument, "band index out of range");
    return hash_band(std::span(sig.values).subspan(band_index * params_.rows, params_.rows));
  }

  BandHashes all(const MinHashSignature& sig) const {
    check(sig);
    BandHashes out(params_.bands);
    for (std::size_t j = 0; j < params_.bands; ++j) {
      out[j] = hash_band(std::span(sig.values).subspan(j * params_.rows, params_.rows));
    }
    return out;
  }

 private:
  void check(const MinHashSignature& sig) const {
    require(sig.num_perm() == params_.num_perm, ErrorCode::kConfiguration,
            "signature length does not match num_perm");
    require(sig.family_seed == params_.signature_seed, ErrorCode::kConfiguration,
            "signature was computed with a different seed");
  }

  LshParams params_;
  UniversalHashFamily row_hashes_;
};

inline std::uint64_t band_hash(const MinHashSignature& sig, std::size_t band_index,
                               const LshParams& params) {
  return BandHasher(params)(sig, band_index);
}

/// Conventional MinHashLSH index: one bucket map per band from band hash to
/// the ordinals of the documents that landed there. Serves as the reference
/// the Bloom-filter index is checked against.
///
/// Not internally synchronized: many readers or one writer.
class ClassicLshIndex {
 public:
  explicit ClassicLshIndex(const LshParams& params)
      : params_(params), hasher_(params), buckets_(params.bands) {}

  const LshParams& params() const { return params_; }
  const BandHasher& hasher() const { return hasher_; }
  std::size_t doc_count() const { return ids_.size(); }
  std::size_t bucket_count(std::size_t band) const { return buckets_.at(band).size(); }

  void insert(const std::string& id, const MinHashSignature& sig) { insert(id, hasher_.all(sig)); }

  void insert(const std::string& id, std::span<const std::uint64_t> band_hashes) {
    check(band_hashes);
    require(!id.empty(), ErrorCode::kInvalidArgument, "document id must be non-empty");
    if (!id_set_.insert(id).second) throw Error(ErrorCode::kDuplicateId, "id already present: " + id);
    const auto ordinal = static_cast<std::uint32_t>(ids_.size());
    ids_.push_back(id);
    id_bytes_ += id.size();
    for (std::size_t j = 0; j < params_.bands; ++j) {
      auto& bucket = buckets_[j][band_hashes[j]];
      bucket.push_back(ordinal);
      ++entries_;
    }
  }

  /// Ids of every document sharing at least one band, sorted.
  std::vector<std::string> query(const MinHashSignature& sig) const {
    return query(std::span<const std::uint64_t>(hasher_.all(sig)));
  }

  std::vector<std::string> query(std::span<const std::uint64_t> band_hashes) const {
    check(band_hashes);
    std::vector<std::uint32_t> ordinals;
    for (std::size_t j = 0; j < params_.bands; ++j) {
      auto it = buckets_[j].find(band_hashes[j]);
      if (it != buckets_[j].end()) ordinals.insert(ordinals.end(), it->second.begin(), it->second.end());
    }
    std::sort(ordinals.begin(), ordinals.end());
    ordinals.erase(std::unique(ordinals.begin(), ordinals.end()), ordinals.end());
    std::vector<std::string> out;
    out.reserve(ordinals.size());
    for (auto o : ordinals) out.push_back(ids_[o]);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Indices of bands whose bucket is non-empty for these hashes.
  std::vector<std::uint32_t> colliding_bands(std::span<const std::uint64_t> band_hashes) const {
    check(band_hashes);
    std::vector<std::uint32_t> out;
    for (std::size_t j = 0; j < params_.bands; ++j) {
      if (buckets_[j].contains(band_hashes[j])) out.push_back(static_cast<std::uint32_t>(j));
    }
    return out;
  }

  /// Size of a compact encoding of the index: every id once, then per band
  /// each bucket as (8-byte key, 4-byte length) plus 4 bytes per entry.
  /// A lower bound on what any realization of this index must store.
  std::uint64_t footprint_bytes() const {
    std::uint64_t total = id_bytes_ + 4 * ids_.size();
    for (const auto& band : buckets_) total += 12 * band.size();
    return total + 4 * entries_;
  }

 private:
  void check(std::span<const std::uint64_t> band_hashes) const {
    require(band_hashes.size() == params_.bands, ErrorCode::kConfiguration,
            "band hash count does not match params");
  }

  LshParams params_;
  BandHasher hasher_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>> buckets_;
  std::vector<std::string> ids_;
  std::unordered_set<std::string> id_set_;
  std::uint64_t id_bytes_ = 0;
  std::uint64_t entries_ = 0;
};

}  // namespace lshbloom
