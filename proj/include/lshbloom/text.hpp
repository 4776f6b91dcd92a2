#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "lshbloom/error.hpp"
#include "lshbloom/hash.hpp"

namespace lshbloom {

/// Unit of deduplication. `id` must be non-empty and unique within a run.
struct Document {
  std::string id;
  std::string text;  // UTF-8
};

enum class ShingleUnit : std::uint8_t { kWord, kChar };

inline constexpr std::size_t kDefaultShingleSize = 3;

namespace detail {

inline const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw Error(ErrorCode::kConfiguration, "ICU NFC normalizer unavailable");
  }
  return *n;
}

inline icu::UnicodeString to_nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kInvalidArgument, "unicode normalization failed");
  }
  return out;
}

inline bool is_space(UChar32 c) {
  return u_isUWhiteSpace(c) || c == 0x09 || c == 0x0A || c == 0x0B || c == 0x0C ||
         c == 0x0D || c == 0x1C || c == 0x1D || c == 0x1E || c == 0x1F;
}

inline std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Splits UTF-8 into scalar values, each as its own byte slice.
inline std::vector<std::string_view> split_scalars(std::string_view s) {
  std::vector<std::string_view> out;
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < len) {
    std::int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, len, c);
    (void)c;
    out.push_back(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
  }
  return out;
}

// Token separator for n-gram fingerprints (ASCII unit separator).
inline constexpr char kTokenSeparator = '\x1f';

inline std::uint64_t fingerprint_tokens(const std::vector<std::string_view>& tokens,
                                        std::size_t first, std::size_t count,
                                        std::string& scratch) {
  scratch.clear();
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) scratch.push_back(kTokenSeparator);
    scratch.append(tokens[first + i]);
  }
  return fingerprint64(scratch);
}

}  // namespace detail

/// NFC, lowercase (root locale), drop control characters, collapse whitespace
/// runs to one ASCII space, trim. Idempotent.
inline std::string normalize(std::string_view text) {
  if (text.empty()) return {};
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
  u = detail::to_nfc(u);
  u.toLower(icu::Locale::getRoot());

  icu::UnicodeString filtered;
  bool pending_space = false;
  for (std::int32_t i = 0; i < u.length();) {
    UChar32 c = u.char32At(i);
    i += U16_LENGTH(c);
    if (detail::is_space(c)) {
      pending_space = !filtered.isEmpty();
      continue;
    }
    if (u_charType(c) == U_CONTROL_CHAR) continue;
    if (pending_space) {
      filtered.append(static_cast<UChar>(0x20));
      pending_space = false;
    }
    filtered.append(c);
  }
  // Dropping controls can bring a combining mark next to its base.
  filtered = detail::to_nfc(filtered);

  std::string out;
  filtered.toUTF8String(out);
  return out;
}

/// Splits on '\n', dropping empty and whitespace-only segments. Segments are
/// returned verbatim (not normalized).
inline std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view seg = text.substr(start, end - start);
    bool blank = std::all_of(seg.begin(), seg.end(), [](char c) {
      return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
    });
    if (!blank) out.emplace_back(seg);
    start = end + 1;
  }
  return out;
}

/// Tokens of already-normalized text.
inline std::vector<std::string_view> tokenize(std::string_view normalized, ShingleUnit unit) {
  return unit == ShingleUnit::kWord ? detail::split_spaces(normalized)
                                    : detail::split_scalars(normalized);
}

/// Set of 64-bit n-gram fingerprints, stored sorted and unique.
struct ShingleSet {
  std::vector<std::uint64_t> elements;
  std::size_t n = kDefaultShingleSize;
  ShingleUnit unit = ShingleUnit::kWord;

  std::size_t size() const { return elements.size(); }
  bool empty() const { return elements.empty(); }

  /// Builds a set from arbitrary fingerprints (sorts and deduplicates).
  static ShingleSet from_fingerprints(std::vector<std::uint64_t> fps, std::size_t n = kDefaultShingleSize,
                                      ShingleUnit unit = ShingleUnit::kWord) {
    std::sort(fps.begin(), fps.end());
    fps.erase(std::unique(fps.begin(), fps.end()), fps.end());
    return ShingleSet{std::move(fps), n, unit};
  }
};

/// Fingerprints of every contiguous n-gram of an already-normalized text, in
/// order, with repeats (a multiset). Fewer than n tokens gives one n-gram over
/// all tokens; no tokens gives an empty result.
inline std::vector<std::uint64_t> ngram_fingerprints(std::string_view normalized, std::size_t n,
                                                     ShingleUnit unit) {
  require(n >= 1, ErrorCode::kInvalidArgument, "shingle size must be >= 1");
  const auto tokens = tokenize(normalized, unit);
  std::vector<std::uint64_t> out;
  if (tokens.empty()) return out;
  std::string scratch;
  if (tokens.size() < n) {
    out.push_back(detail::fingerprint_tokens(tokens, 0, tokens.size(), scratch));
    return out;
  }
  out.reserve(tokens.size() - n + 1);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    out.push_back(detail::fingerprint_tokens(tokens, i, n, scratch));
  }
  return out;
}

inline ShingleSet shingle(std::string_view text, std::size_t n = kDefaultShingleSize,
                          ShingleUnit unit = ShingleUnit::kWord) {
  require(n >= 1, ErrorCode::kInvalidArgument, "shingle size must be >= 1");
  const std::string norm = normalize(text);
  auto fps = ngram_fingerprints(norm, n, unit);
  if (fps.empty()) throw Error(ErrorCode::kEmptyDocument, "empty document");
  return ShingleSet::from_fingerprints(std::move(fps), n, unit);
}

/// |A ∩ B| / |A ∪ B| over two sets built with the same (n, unit).
inline double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
  require(a.n == b.n && a.unit == b.unit, ErrorCode::kConfiguration,
          "shingle sets differ in n or unit");
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  auto i = a.elements.begin();
  auto j = b.elements.begin();
  while (i != a.elements.end() && j != b.elements.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const std::size_t unions = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(unions);
}

}  // namespace lshbloom
