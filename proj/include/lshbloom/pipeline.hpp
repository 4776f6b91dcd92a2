#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lshbloom/baselines.hpp"
#include "lshbloom/error.hpp"
#include "lshbloom/lsh.hpp"
#include "lshbloom/lshbloom_index.hpp"
#include "lshbloom/minhash.hpp"
#include "lshbloom/text.hpp"

namespace lshbloom {

enum class Method : std::uint8_t { kLshBloom, kClassicLsh, kParagraph, kNgram };
enum class Verdict : std::uint8_t { kUnique, kDuplicate };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kLshBloom: return "lshbloom";
    case Method::kClassicLsh: return "classic_lsh";
    case Method::kParagraph: return "paragraph";
    case Method::kNgram: return "ngram";
  }
  return "unknown";
}

inline std::string_view to_string(Verdict v) { return v == Verdict::kDuplicate ? "duplicate" : "unique"; }

inline Method parse_method(std::string_view name) {
  for (Method m : {Method::kLshBloom, Method::kClassicLsh, Method::kParagraph, Method::kNgram}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorCode::kConfiguration, "unknown method: " + std::string(name));
}

inline bool is_lsh(Method m) { return m == Method::kLshBloom || m == Method::kClassicLsh; }

/// Per-document verdict. `bands` is filled for LSH methods, `fraction` for
/// the overlap baselines.
struct DedupDecision {
  std::string doc_id;
  Verdict verdict = Verdict::kUnique;
  Method method = Method::kLshBloom;
  std::vector<std::uint32_t> bands;
  std::optional<double> fraction;

  bool duplicate() const { return verdict == Verdict::kDuplicate; }
};

struct DedupConfig {
  Method method = Method::kLshBloom;
  double threshold = 0.8;
  std::size_t num_perm = 128;
  std::size_t shingle_size = kDefaultShingleSize;
  ShingleUnit shingle_unit = ShingleUnit::kWord;
  std::size_t ngram_size = 13;
  /// LSHBloom: effective false-positive rate of the whole index. Baselines:
  /// false-positive rate of the fingerprint filter (0 = exact set).
  double fp_rate = 1e-5;
  std::uint64_t expected_docs = 1'000'000;
  /// Baseline filter capacity (paragraphs or n-grams); 0 = expected_docs.
  std::uint64_t expected_items = 0;
  OverlapWeighting weighting = OverlapWeighting::kCharacters;
  std::uint64_t seed = 1;

  /// Signature and band-hash seeds are derived from `seed`.
  LshParams lsh_params() const {
    return LshParams::optimal(threshold, num_perm, derive_seed(seed, kSignatureDomain, 0),
                              derive_seed(seed, kBandDomain, 0));
  }

  OverlapConfig overlap_config() const {
    OverlapConfig c;
    c.threshold = threshold;
    c.ngram_n = ngram_size;
    c.expected_items = expected_items == 0 ? expected_docs : expected_items;
    c.target_p = fp_rate;
    c.weighting = weighting;
    c.seed = derive_seed(seed, kStoreDomain, 0);
    return c;
  }

  static constexpr std::uint64_t kSignatureDomain = 0x5349474e;  // "SIGN"
  static constexpr std::uint64_t kBandDomain = 0x42414e44;       // "BAND"
  static constexpr std::uint64_t kStoreDomain = 0x53544f52;      // "STOR"
};

/// What a worker computes for one document before the ordered commit stage.
using Features = std::variant<BandHashes, WeightedFingerprints>;

/// One deduplication run for one method: pure feature extraction (safe to call
/// from many threads) plus a stateful commit that must be called in stream
/// order.
class Deduplicator {
 public:
  explicit Deduplicator(const DedupConfig& config) : config_(config) {
    if (is_lsh(config.method)) {
      LshParams params = config.lsh_params();
      init_lsh(params);
      if (config.method == Method::kLshBloom) {
        engine_.emplace<LshBloomIndex>(params, config.expected_docs, config.fp_rate);
      } else {
        engine_.emplace<ClassicLshIndex>(params);
      }
    } else {
      const OverlapConfig oc = config.overlap_config();
      oc.validate();
      engine_.emplace<FingerprintStore>(oc);
    }
  }

  /// Continues an existing index; its parameters override the config's.
  Deduplicator(const DedupConfig& config, LshBloomIndex index) : config_(config) {
    config_.method = Method::kLshBloom;
    config_.threshold = index.params().threshold;
    config_.num_perm = index.params().num_perm;
    config_.expected_docs = index.capacity();
    config_.fp_rate = index.p_effective();
    init_lsh(index.params());
    engine_.emplace<LshBloomIndex>(std::move(index));
  }

  const DedupConfig& config() const { return config_; }
  Method method() const { return config_.method; }

  Features extract(const Document& doc) const {
    switch (config_.method) {
      case Method::kLshBloom:
      case Method::kClassicLsh: {
        const ShingleSet shingles = shingle(doc.text, config_.shingle_size, config_.shingle_unit);
        return hasher_->all(minhash_signature(shingles, *family_));
      }
      case Method::kParagraph:
        return paragraph_features(doc.text, config_.weighting);
      case Method::kNgram:
        return ngram_features(doc.text, config_.ngram_size);
    }
    throw Error(ErrorCode::kConfiguration, "unknown method");
  }

  /// Query-then-insert in stream order.
  DedupDecision commit(const std::string& id, const Features& features) {
    DedupDecision d;
    d.doc_id = id;
    d.method = config_.method;
    if (auto* bloom = std::get_if<LshBloomIndex>(&engine_)) {
      d.bands = bloom->query_then_insert(std::get<BandHashes>(features)).bands;
    } else if (auto* classic = std::get_if<ClassicLshIndex>(&engine_)) {
      const auto& hashes = std::get<BandHashes>(features);
      auto bands = classic->colliding_bands(hashes);
      classic->insert(id, hashes);
      d.bands = std::move(bands);
    } else {
      auto& store = std::get<FingerprintStore>(engine_);
      const auto v = commit_overlap(std::get<WeightedFingerprints>(features), config_.threshold, store);
      d.fraction = v.fraction;
      d.verdict = v.duplicate ? Verdict::kDuplicate : Verdict::kUnique;
      return d;
    }
    d.verdict = d.bands.empty() ? Verdict::kUnique : Verdict::kDuplicate;
    return d;
  }

  DedupDecision process(const Document& doc) { return commit(doc.id, extract(doc)); }

  /// Insert without reporting a verdict (index building).
  void insert(const std::string& id, const Features& features) {
    if (auto* bloom = std::get_if<LshBloomIndex>(&engine_)) {
      bloom->insert(std::get<BandHashes>(features));
    } else if (auto* classic = std::get_if<ClassicLshIndex>(&engine_)) {
      classic->insert(id, std::get<BandHashes>(features));
    } else {
      auto& store = std::get<FingerprintStore>(engine_);
      for (auto fp : std::get<WeightedFingerprints>(features).fingerprints) store.insert(fp);
    }
  }

  /// Membership query without insertion (LSH methods only).
  DedupDecision probe(const Document& doc) const { return probe(doc.id, extract(doc)); }

  DedupDecision probe(const std::string& id, const Features& features) const {
    require(is_lsh(config_.method), ErrorCode::kConfiguration, "probe needs an LSH method");
    const auto& hashes = std::get<BandHashes>(features);
    DedupDecision d;
    d.doc_id = id;
    d.method = config_.method;
    if (const auto* bloom = std::get_if<LshBloomIndex>(&engine_)) {
      d.bands = bloom->query(hashes).bands;
    } else {
      d.bands = std::get<ClassicLshIndex>(engine_).colliding_bands(hashes);
    }
    d.verdict = d.bands.empty() ? Verdict::kUnique : Verdict::kDuplicate;
    return d;
  }

  /// Index size in bytes: the exact saved-file size for LSHBloom, the compact
  /// footprint for the classic index, the store size for baselines.
  std::uint64_t index_bytes() const {
    if (const auto* bloom = std::get_if<LshBloomIndex>(&engine_)) return bloom->encoded_size();
    if (const auto* classic = std::get_if<ClassicLshIndex>(&engine_)) return classic->footprint_bytes();
    return std::get<FingerprintStore>(engine_).size_bytes();
  }

  const LshBloomIndex* bloom_index() const { return std::get_if<LshBloomIndex>(&engine_); }
  const ClassicLshIndex* classic_index() const { return std::get_if<ClassicLshIndex>(&engine_); }

 private:
  void init_lsh(const LshParams& params) {
    family_.emplace(params.signature_seed, params.num_perm);
    hasher_.emplace(params);
  }

  DedupConfig config_;
  std::optional<UniversalHashFamily> family_;
  std::optional<BandHasher> hasher_;
  std::variant<std::monostate, LshBloomIndex, ClassicLshIndex, FingerprintStore> engine_;
};

// ---------------------------------------------------------------------------
// Line records

/// Field names of the line-record format; corpora differ.
struct RecordFormat {
  std::string id_field = "id";
  std::string text_field = "text";
};

inline Document parse_record(std::string_view line, const RecordFormat& format = {}) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "malformed JSON record");
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "record is not an object");
  Document doc;
  auto id = j.find(format.id_field);
  if (id == j.end()) throw Error(ErrorCode::kInvalidArgument, "missing field \"" + format.id_field + "\"");
  if (id->is_string()) {
    doc.id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    doc.id = id->dump();
  } else {
    throw Error(ErrorCode::kInvalidArgument, "field \"" + format.id_field + "\" must be a string or integer");
  }
  if (doc.id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty document id");
  auto text = j.find(format.text_field);
  if (text == j.end() || !text->is_string()) {
    throw Error(ErrorCode::kInvalidArgument, "missing string field \"" + format.text_field + "\"");
  }
  doc.text = text->get<std::string>();
  return doc;
}

inline std::string format_record(const Document& doc, const RecordFormat& format = {}) {
  nlohmann::json j;
  j[format.id_field] = doc.id;
  j[format.text_field] = doc.text;
  return j.dump();
}

inline std::string format_decision(const DedupDecision& d) {
  nlohmann::ordered_json j;
  j["id"] = d.doc_id;
  j["verdict"] = to_string(d.verdict);
  j["method"] = to_string(d.method);
  if (is_lsh(d.method)) j["bands"] = d.bands;
  if (d.fraction) j["fraction"] = *d.fraction;
  return j.dump();
}

inline DedupDecision parse_decision(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("verdict")) {
    throw Error(ErrorCode::kInvalidArgument, "malformed decision record");
  }
  DedupDecision d;
  d.doc_id = j["id"].get<std::string>();
  const auto verdict = j["verdict"].get<std::string>();
  if (verdict != "unique" && verdict != "duplicate") {
    throw Error(ErrorCode::kInvalidArgument, "unknown verdict: " + verdict);
  }
  d.verdict = verdict == "duplicate" ? Verdict::kDuplicate : Verdict::kUnique;
  if (j.contains("method")) d.method = parse_method(j["method"].get<std::string>());
  if (j.contains("bands")) d.bands = j["bands"].get<std::vector<std::uint32_t>>();
  if (j.contains("fraction")) d.fraction = j["fraction"].get<double>();
  return d;
}

/// A line that could not be turned into a decision.
struct RecordError {
  std::string source;
  std::uint64_t line = 0;  // 1-based
  std::string message;
};

inline std::string format_error(const RecordError& e) {
  nlohmann::ordered_json j;
  j["source"] = e.source;
  j["line"] = e.line;
  j["error"] = e.message;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Streaming

/// Worker count: LSHBLOOM_WORKERS if set, else the hardware concurrency.
inline std::size_t default_workers() {
  if (const char* env = std::getenv("LSHBLOOM_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct StreamSummary {
  std::uint64_t documents = 0;  // decisions emitted
  std::uint64_t duplicates = 0;
  std::uint64_t errors = 0;
  double total_seconds = 0.0;    // whole stream including I/O
  double extract_seconds = 0.0;  // parsing, shingling, signatures
  double index_seconds = 0.0;    // ordered query-then-insert stage
  std::uint64_t index_bytes = 0;
};

enum class StreamMode : std::uint8_t {
  kDedup,   // query then insert; one decision per record
  kInsert,  // insert only; no decisions
  kProbe,   // query only; the index is not modified
};

struct StreamOptions {
  RecordFormat format;
  std::size_t workers = 0;  // 0 = default_workers()
  std::size_t batch_size = 4096;
  std::string source = "<stdin>";
  StreamMode mode = StreamMode::kDedup;
};

using DecisionSink = std::function<void(const DedupDecision&)>;
using ErrorSink = std::function<void(const RecordError&)>;

namespace detail {

template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    });
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Deduplicates a stream of line records. Features are computed in parallel
/// batches; commits happen strictly in input order, so verdicts do not depend
/// on the worker count. Bad lines go to `on_error` and the run continues.
/// Accumulates into `summary`, so several inputs can share one summary.
inline void dedup_stream(std::istream& in, Deduplicator& dedup, const StreamOptions& options,
                         const DecisionSink& on_decision, const ErrorSink& on_error,
                         StreamSummary& summary) {
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();
  const std::size_t workers = options.workers == 0 ? default_workers() : options.workers;

  struct Slot {
    std::uint64_t line = 0;
    std::string text;
    std::string id;
    std::optional<Features> features;
    std::string error;
  };
  std::vector<Slot> batch;
  std::uint64_t line_no = 0;
  bool eof = false;
  while (!eof) {
    batch.clear();
    std::string line;
    while (batch.size() < options.batch_size) {
      if (!std::getline(in, line)) {
        eof = true;
        break;
      }
      ++line_no;
      if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
      batch.push_back(Slot{line_no, std::move(line), {}, {}, {}});
    }
    if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + options.source);

    const auto t_extract = Clock::now();
    detail::parallel_for(batch.size(), workers, [&](std::size_t i) {
      Slot& s = batch[i];
      try {
        Document doc = parse_record(s.text, options.format);
        s.id = std::move(doc.id);
        s.features = dedup.extract(Document{s.id, std::move(doc.text)});
      } catch (const Error& e) {
        s.error = e.what();
      } catch (const std::exception& e) {
        s.error = e.what();
      }
    });
    summary.extract_seconds += detail::seconds_since(t_extract);

    for (Slot& s : batch) {
      if (!s.features) {
        ++summary.errors;
        on_error(RecordError{options.source, s.line, s.error});
        continue;
      }
      const auto t_commit = Clock::now();
      std::optional<DedupDecision> d;
      try {
        if (options.mode == StreamMode::kInsert) {
          dedup.insert(s.id, *s.features);
          summary.index_seconds += detail::seconds_since(t_commit);
          ++summary.documents;
          continue;
        }
        d = options.mode == StreamMode::kProbe ? dedup.probe(s.id, *s.features)
                                               : dedup.commit(s.id, *s.features);
      } catch (const Error& e) {
        summary.index_seconds += detail::seconds_since(t_commit);
        ++summary.errors;
        on_error(RecordError{options.source, s.line, e.what()});
        continue;
      }
      summary.index_seconds += detail::seconds_since(t_commit);
      ++summary.documents;
      summary.duplicates += d->duplicate();
      on_decision(*d);
    }
  }
  summary.total_seconds += detail::seconds_since(t_start);
  summary.index_bytes = dedup.index_bytes();
}

/// Convenience: run documents already in memory, in order.
inline std::vector<DedupDecision> dedup_documents(Deduplicator& dedup, std::span<const Document> docs,
                                                  std::size_t workers = 1) {
  std::vector<std::optional<Features>> features(docs.size());
  std::vector<std::exception_ptr> errors(docs.size());
  detail::parallel_for(docs.size(), workers, [&](std::size_t i) {
    try {
      features[i] = dedup.extract(docs[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  std::vector<DedupDecision> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(dedup.commit(docs[i].id, *features[i]));
  }
  return out;
}

}  // namespace lshbloom
