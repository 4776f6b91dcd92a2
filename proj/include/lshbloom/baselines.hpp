#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_set>
#include <variant>
#include <vector>

#include "lshbloom/bloom.hpp"
#include "lshbloom/error.hpp"
#include "lshbloom/hash.hpp"
#include "lshbloom/random.hpp"
#include "lshbloom/text.hpp"

namespace lshbloom {

/// How a document's duplicated fraction is weighted across its paragraphs.
enum class OverlapWeighting : std::uint8_t { kCharacters, kCount };

struct OverlapConfig {
  double threshold = 0.8;          // duplicate iff duplicated fraction >= threshold
  std::size_t ngram_n = 13;        // n-gram method only
  std::uint64_t expected_items = 1'000'000;
  double target_p = 1e-5;          // 0 selects an exact hash set
  OverlapWeighting weighting = OverlapWeighting::kCharacters;  // paragraph method only
  std::uint64_t seed = 0;

  void validate() const {
    require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::kConfiguration,
            "overlap threshold must be in [0, 1]");
    require(ngram_n >= 1, ErrorCode::kConfiguration, "n-gram size must be >= 1");
    require(target_p >= 0.0 && target_p < 1.0, ErrorCode::kConfiguration,
            "target false-positive rate must be in [0, 1)");
    require(expected_items >= 1, ErrorCode::kConfiguration, "expected item count must be >= 1");
  }
};

/// Set of seen fingerprints: a Bloom filter, or an exact hash set when the
/// configured false-positive rate is 0.
class FingerprintStore {
 public:
  FingerprintStore(std::uint64_t expected_items, double target_p, std::uint64_t seed = 0) {
    if (target_p == 0.0) {
      store_.emplace<std::unordered_set<std::uint64_t>>();
    } else {
      store_.emplace<BloomFilter>(expected_items, target_p, seed);
    }
  }

  explicit FingerprintStore(const OverlapConfig& config)
      : FingerprintStore(config.expected_items, config.target_p, config.seed) {}

  bool exact() const { return std::holds_alternative<std::unordered_set<std::uint64_t>>(store_); }

  bool contains(std::uint64_t fp) const {
    if (const auto* set = std::get_if<std::unordered_set<std::uint64_t>>(&store_)) return set->contains(fp);
    return std::get<BloomFilter>(store_).contains(fp);
  }

  void insert(std::uint64_t fp) {
    if (auto* set = std::get_if<std::unordered_set<std::uint64_t>>(&store_)) {
      set->insert(fp);
    } else {
      std::get<BloomFilter>(store_).insert(fp);
    }
  }

  /// Bloom payload bytes, or 8 bytes per distinct fingerprint for the exact set.
  std::uint64_t size_bytes() const {
    if (const auto* set = std::get_if<std::unordered_set<std::uint64_t>>(&store_)) return 8 * set->size();
    return std::get<BloomFilter>(store_).payload_bytes();
  }

  const BloomFilter* bloom() const { return std::get_if<BloomFilter>(&store_); }

 private:
  std::variant<BloomFilter, std::unordered_set<std::uint64_t>> store_{std::in_place_type<std::unordered_set<std::uint64_t>>};
};

/// Fingerprints of a document's units with their weights.
struct WeightedFingerprints {
  std::vector<std::uint64_t> fingerprints;
  std::vector<std::uint64_t> weights;
};

struct OverlapVerdict {
  bool duplicate = false;
  double fraction = 0.0;  // duplicated weight / total weight, in [0, 1]
};

/// Normalized paragraphs, fingerprinted, weighted by code-point length (or 1
/// each). Paragraphs that normalize to nothing are skipped.
inline WeightedFingerprints paragraph_features(std::string_view text, OverlapWeighting weighting) {
  WeightedFingerprints out;
  for (const auto& para : split_paragraphs(text)) {
    const std::string norm = normalize(para);
    if (norm.empty()) continue;
    out.fingerprints.push_back(fingerprint64(norm));
    out.weights.push_back(weighting == OverlapWeighting::kCount
                              ? 1
                              : static_cast<std::uint64_t>(tokenize(norm, ShingleUnit::kChar).size()));
  }
  if (out.fingerprints.empty()) throw Error(ErrorCode::kEmptyDocument, "empty document");
  return out;
}

/// Every word n-gram occurrence of the normalized text, each with weight 1.
inline WeightedFingerprints ngram_features(std::string_view text, std::size_t n) {
  WeightedFingerprints out;
  out.fingerprints = ngram_fingerprints(normalize(text), n, ShingleUnit::kWord);
  if (out.fingerprints.empty()) throw Error(ErrorCode::kEmptyDocument, "empty document");
  out.weights.assign(out.fingerprints.size(), 1);
  return out;
}

/// Measures the duplicated fraction of `features` against `store`, decides,
/// then inserts all fingerprints. Units repeated inside one document do not
/// count against it.
inline OverlapVerdict commit_overlap(const WeightedFingerprints& features, double threshold,
                                     FingerprintStore& store) {
  std::uint64_t total = 0;
  std::uint64_t duplicated = 0;
  for (std::size_t i = 0; i < features.fingerprints.size(); ++i) {
    total += features.weights[i];
    if (store.contains(features.fingerprints[i])) duplicated += features.weights[i];
  }
  for (auto fp : features.fingerprints) store.insert(fp);
  OverlapVerdict v;
  v.fraction = total == 0 ? 0.0 : static_cast<double>(duplicated) / static_cast<double>(total);
  v.duplicate = v.fraction >= threshold;
  return v;
}

/// Paragraph-exact deduplication at document level.
inline OverlapVerdict paragraph_dedup(const Document& doc, const OverlapConfig& config,
                                      FingerprintStore& store) {
  config.validate();
  return commit_overlap(paragraph_features(doc.text, config.weighting), config.threshold, store);
}

/// N-gram overlap deduplication at document level.
inline OverlapVerdict ngram_dedup(const Document& doc, const OverlapConfig& config,
                                  FingerprintStore& store) {
  config.validate();
  return commit_overlap(ngram_features(doc.text, config.ngram_n), config.threshold, store);
}

/// Number of word n-gram occurrences in one document (at least 1 for a
/// non-empty document).
inline std::uint64_t count_ngrams(std::string_view text, std::size_t n) {
  const std::string norm = normalize(text);
  const std::size_t tokens = tokenize(norm, ShingleUnit::kWord).size();
  if (tokens == 0) return 0;
  return tokens < n ? 1 : tokens - n + 1;
}

inline std::uint64_t count_paragraphs(std::string_view text) {
  std::uint64_t count = 0;
  for (const auto& para : split_paragraphs(text)) count += !normalize(para).empty();
  return count;
}

/// Mean of `count(doc.text)` over a uniform sample (without replacement) of
/// `sample_size` documents, times `total_docs`, rounded up. A sample at
/// least as large as the corpus enumerates it exactly.
template <typename Count>
std::uint64_t estimate_corpus_units(std::span<const Document> corpus, std::size_t sample_size,
                                    std::uint64_t total_docs, std::uint64_t seed, Count&& count) {
  require(!corpus.empty(), ErrorCode::kInvalidArgument, "empty corpus");
  require(sample_size >= 1 && total_docs >= 1, ErrorCode::kInvalidArgument,
          "sample size and total_docs must be >= 1");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(sample_size, corpus.size());
  std::mt19937_64 rng(seed);
  partial_shuffle(order, k, rng);
  unsigned __int128 sum = 0;
  for (std::size_t i = 0; i < k; ++i) sum += count(corpus[order[i]].text);
  const unsigned __int128 scaled = sum * total_docs;
  return static_cast<std::uint64_t>((scaled + k - 1) / k);
}

/// Estimated word n-gram occurrences in a corpus of `total_docs` documents.
inline std::uint64_t estimate_corpus_ngrams(std::span<const Document> corpus, std::size_t n,
                                            std::size_t sample_size, std::uint64_t total_docs,
                                            std::uint64_t seed = 0) {
  require(n >= 1, ErrorCode::kInvalidArgument, "n must be >= 1");
  return estimate_corpus_units(corpus, sample_size, total_docs, seed,
                               [n](std::string_view text) { return count_ngrams(text, n); });
}

}  // namespace lshbloom
