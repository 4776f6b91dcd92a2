#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lshbloom/error.hpp"
#include "lshbloom/hash.hpp"
#include "lshbloom/lsh.hpp"
#include "lshbloom/lshbloom_index.hpp"
#include "lshbloom/pipeline.hpp"
#include "lshbloom/random.hpp"
#include "lshbloom/text.hpp"

namespace lshbloom {

// ---------------------------------------------------------------------------
// Synthetic documents

/// Word `w` of a synthetic vocabulary: lowercase letters, unique per w.
inline std::string synthetic_word(std::uint64_t w) {
  std::string out;
  std::uint64_t v = w + 26 * 26;  // at least three letters
  while (v > 0) {
    out.push_back(static_cast<char>('a' + v % 26));
    v /= 26;
  }
  return out;
}

struct CorpusShape {
  std::size_t words_per_doc = 60;  // mean; lengths are uniform in [w/2, 3w/2]
  std::size_t vocabulary = 50'000;
};

/// Document `index` of the random corpus identified by `seed`. Random access:
/// any document can be produced without the ones before it.
inline Document random_document(std::uint64_t seed, std::uint64_t index, const CorpusShape& shape = {}) {
  require(shape.words_per_doc >= 1 && shape.vocabulary >= 1, ErrorCode::kInvalidArgument,
          "corpus shape must be positive");
  std::mt19937_64 rng(derive_seed(seed, 0x434f5250 /* CORP */, index));
  const std::size_t lo = std::max<std::size_t>(1, shape.words_per_doc / 2);
  const std::size_t len = lo + uniform_below(rng, shape.words_per_doc + 1);
  Document doc;
  doc.id = "doc-" + std::to_string(index);
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0) doc.text.push_back(' ');
    doc.text += synthetic_word(uniform_below(rng, shape.vocabulary));
  }
  return doc;
}

inline std::vector<Document> random_corpus(std::size_t n_docs, std::uint64_t seed,
                                           const CorpusShape& shape = {}) {
  std::vector<Document> out;
  out.reserve(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) out.push_back(random_document(seed, i, shape));
  return out;
}

/// Copy of `text` with each whitespace-delimited token dropped independently
/// with probability `dropout`. Kept tokens keep their trailing whitespace, so
/// dropout 0 returns the text unchanged. At least one token always survives.
inline std::string drop_tokens(std::string_view text, double dropout, std::mt19937_64& rng) {
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  std::string out;
  std::size_t i = 0;
  while (i < text.size() && is_ws(text[i])) out.push_back(text[i++]);
  const std::size_t lead = out.size();
  std::string_view first_token;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && !is_ws(text[j])) ++j;
    std::size_t k = j;
    while (k < text.size() && is_ws(text[k])) ++k;
    if (first_token.empty()) first_token = text.substr(i, j - i);
    if (dropout == 0.0 || uniform_unit(rng) >= dropout) out.append(text.substr(i, k - i));
    i = k;
  }
  if (out.size() == lead && !first_token.empty()) out.append(first_token);
  return out;
}

// ---------------------------------------------------------------------------
// Labeled benchmark corpora

struct Label {
  bool duplicate = false;
  std::string duplicate_of;  // set when duplicate
};

struct LabeledCorpus {
  std::vector<Document> documents;
  std::unordered_map<std::string, Label> labels;
};

/// Clones `n_duplicates` uniformly chosen base documents with token dropout
/// and mixes them into the corpus in a seeded random order. Every original is
/// placed before its clone so that first-seen-wins keeps the original.
inline LabeledCorpus synthesize_benchmark(std::vector<Document> base, std::size_t n_duplicates,
                                          double dropout, std::uint64_t seed) {
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::kInvalidArgument, "dropout must be in [0, 1)");
  require(n_duplicates <= base.size(), ErrorCode::kInvalidArgument,
          "more duplicates requested than base documents");
  LabeledCorpus out;
  std::unordered_set<std::string> ids;
  for (const auto& d : base) {
    require(!d.id.empty() && ids.insert(d.id).second, ErrorCode::kInvalidArgument,
            "base ids must be non-empty and unique: " + d.id);
    out.labels[d.id] = Label{};
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pick(base.size());
  std::iota(pick.begin(), pick.end(), 0);
  partial_shuffle(pick, n_duplicates, rng);

  std::vector<Document> clones;
  clones.reserve(n_duplicates);
  for (std::size_t i = 0; i < n_duplicates; ++i) {
    const Document& orig = base[pick[i]];
    std::string id = orig.id + "#dup";
    for (int suffix = 2; ids.contains(id); ++suffix) id = orig.id + "#dup" + std::to_string(suffix);
    ids.insert(id);
    out.labels[id] = Label{true, orig.id};
    clones.push_back(Document{std::move(id), drop_tokens(orig.text, dropout, rng)});
  }

  out.documents = std::move(base);
  out.documents.insert(out.documents.end(), std::make_move_iterator(clones.begin()),
                       std::make_move_iterator(clones.end()));
  shuffle(out.documents, rng);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < out.documents.size(); ++i) position[out.documents[i].id] = i;
  for (std::size_t i = 0; i < out.documents.size(); ++i) {
    const Label& label = out.labels.at(out.documents[i].id);
    if (!label.duplicate) continue;
    const std::size_t j = position.at(label.duplicate_of);
    if (j > i) {
      std::swap(out.documents[i], out.documents[j]);
      position[out.documents[i].id] = i;
      position[out.documents[j].id] = j;
    }
  }
  return out;
}

inline std::string format_label(const std::string& id, const Label& label) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["label"] = label.duplicate ? "duplicate" : "original";
  if (label.duplicate) j["duplicate_of"] = label.duplicate_of;
  return j.dump();
}

inline std::pair<std::string, Label> parse_label(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("label")) {
    throw Error(ErrorCode::kInvalidArgument, "malformed label record");
  }
  Label label;
  const auto kind = j["label"].get<std::string>();
  if (kind == "duplicate") {
    label.duplicate = true;
    label.duplicate_of = j.value("duplicate_of", std::string{});
  } else if (kind != "original") {
    throw Error(ErrorCode::kInvalidArgument, "unknown label: " + kind);
  }
  return {j["id"].get<std::string>(), label};
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  double f1 = 0.0;
  double wall_clock_seconds = 0.0;
  std::uint64_t index_bytes = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
};

/// F1 = TP / (TP + (FP + FN) / 2); 0 when the denominator is 0.
inline double f1_score(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const double denom = static_cast<double>(tp) + 0.5 * static_cast<double>(fp + fn);
  return denom > 0.0 ? static_cast<double>(tp) / denom : 0.0;
}

inline EvalReport evaluate(std::span<const DedupDecision> decisions,
                           const std::unordered_map<std::string, Label>& labels) {
  EvalReport r;
  for (const auto& d : decisions) {
    auto it = labels.find(d.doc_id);
    if (it == labels.end()) throw Error(ErrorCode::kInvalidArgument, "unlabeled document id: " + d.doc_id);
    const bool truth = it->second.duplicate;
    if (d.duplicate()) {
      ++(truth ? r.tp : r.fp);
    } else {
      ++(truth ? r.fn : r.tn);
    }
  }
  r.f1 = f1_score(r.tp, r.fp, r.fn);
  return r;
}

inline std::string format_report(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["tn"] = r.tn;
  j["f1"] = r.f1;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  j["index_bytes"] = r.index_bytes;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Scaling bench: index size and index-stage time over growing prefixes

struct BenchConfig {
  std::vector<std::uint64_t> sizes{10'000, 100'000, 1'000'000};
  double threshold = 0.8;
  std::size_t num_perm = 128;
  double p_effective = 1e-5;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  bool run_lshbloom = true;
  bool run_classic = true;
};

struct BenchPoint {
  std::uint64_t docs = 0;
  Method method = Method::kLshBloom;
  std::uint64_t index_bytes = 0;    // saved-file size (LSHBloom) or footprint (classic)
  std::uint64_t payload_bytes = 0;  // LSHBloom filter bit payload
  std::uint64_t plan_bytes = 0;     // LSHBloom analytic payload, b * ceil(m / 8)
  double extract_seconds = 0.0;     // shingling + signatures + band hashes for the prefix
  double index_seconds = 0.0;       // query-then-insert over the prefix
  std::uint64_t duplicates = 0;
};

inline std::string format_bench_point(const BenchPoint& p) {
  nlohmann::ordered_json j;
  j["docs"] = p.docs;
  j["method"] = to_string(p.method);
  j["index_bytes"] = p.index_bytes;
  if (p.method == Method::kLshBloom) {
    j["payload_bytes"] = p.payload_bytes;
    j["plan_bytes"] = p.plan_bytes;
  }
  j["extract_seconds"] = p.extract_seconds;
  j["index_seconds"] = p.index_seconds;
  j["duplicates"] = p.duplicates;
  return j.dump();
}

using DocumentSource = std::function<Document(std::uint64_t index)>;

/// Runs LSHBloom (capacity = prefix size) and the classic index over each
/// prefix of the document source. Band hashes are computed once; both
/// methods consume the same hashes, so index-stage times compare only the
/// index structures.
inline std::vector<BenchPoint> run_scaling_bench(const BenchConfig& config, const DocumentSource& source) {
  require(!config.sizes.empty(), ErrorCode::kInvalidArgument, "bench needs at least one size");
  std::vector<std::uint64_t> sizes = config.sizes;
  std::sort(sizes.begin(), sizes.end());
  require(sizes.front() >= 1, ErrorCode::kInvalidArgument, "bench sizes must be >= 1");
  const std::uint64_t max_docs = sizes.back();

  DedupConfig dc;
  dc.threshold = config.threshold;
  dc.num_perm = config.num_perm;
  dc.seed = config.seed;
  const LshParams params = dc.lsh_params();
  const UniversalHashFamily family(params.signature_seed, params.num_perm);
  const BandHasher hasher(params);
  const std::size_t workers = config.workers == 0 ? default_workers() : config.workers;

  // Band hashes for every document, flattened.
  std::vector<std::uint64_t> hashes(max_docs * params.bands);
  std::vector<std::string> ids(max_docs);
  std::vector<double> extract_at(sizes.size());
  double extract_total = 0.0;
  std::uint64_t done = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t begin = done;
    detail::parallel_for(sizes[s] - begin, workers, [&](std::size_t k) {
      const std::uint64_t i = begin + k;
      Document doc = source(i);
      const auto band = hasher.all(minhash_signature(shingle(doc.text), family));
      std::copy(band.begin(), band.end(), hashes.begin() + static_cast<std::ptrdiff_t>(i * params.bands));
      ids[i] = std::move(doc.id);
    });
    extract_total += detail::seconds_since(t0);
    extract_at[s] = extract_total;
    done = sizes[s];
  }

  std::vector<BenchPoint> out;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const std::uint64_t n = sizes[s];
    if (config.run_lshbloom) {
      LshBloomIndex index(params, n, config.p_effective);
      BenchPoint p{n, Method::kLshBloom};
      const auto t0 = std::chrono::steady_clock::now();
      for (std::uint64_t i = 0; i < n; ++i) {
        p.duplicates += index.query_then_insert(std::span(hashes).subspan(i * params.bands, params.bands)).duplicate();
      }
      p.index_seconds = detail::seconds_since(t0);
      p.extract_seconds = extract_at[s];
      p.index_bytes = index.encoded_size();
      for (const auto& f : index.filters()) p.payload_bytes += f.payload_bytes();
      p.plan_bytes = plan(params, n, config.p_effective).total_bytes;
      out.push_back(p);
    }
    if (config.run_classic) {
      ClassicLshIndex index(params);
      BenchPoint p{n, Method::kClassicLsh};
      const auto t0 = std::chrono::steady_clock::now();
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto band = std::span<const std::uint64_t>(hashes).subspan(i * params.bands, params.bands);
        p.duplicates += !index.colliding_bands(band).empty();
        index.insert(ids[i], band);
      }
      p.index_seconds = detail::seconds_since(t0);
      p.extract_seconds = extract_at[s];
      p.index_bytes = index.footprint_bytes();
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace lshbloom
