// lshbloom: near-duplicate detection with MinHash LSH over Bloom filters.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data error (bad
// records, corrupt index), 3 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lshbloom/lshbloom.hpp"

namespace fs = std::filesystem;
using namespace lshbloom;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfiguration:
      return kExitUsage;
    case ErrorCode::kIo:
      return kExitIo;
    default:
      return kExitData;
  }
}

// Rethrows a parse failure in a file the user handed us as a data error.
[[noreturn]] void data_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kCorrupt, where + ": " + what);
}

std::unique_ptr<std::istream> open_input(const std::string& path) {
  if (path == "-") return std::make_unique<std::istream>(std::cin.rdbuf());
  auto in = std::make_unique<std::ifstream>(path);
  if (!*in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return in;
}

// Writes to a file (atomically on close) or to stdout for "-" / empty.
class Output {
 public:
  explicit Output(std::string path) : path_(std::move(path)) {
    if (path_.empty() || path_ == "-") return;
    tmp_ = path_ + ".tmp";
    file_.open(tmp_, std::ios::trunc);
    if (!file_) throw Error(ErrorCode::kIo, "cannot open " + tmp_ + " for writing");
  }

  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

  void commit() {
    if (!file_.is_open()) {
      std::cout.flush();
      if (!std::cout) throw Error(ErrorCode::kIo, "write to stdout failed");
      return;
    }
    file_.close();
    if (!file_) throw Error(ErrorCode::kIo, "write failed: " + tmp_);
    std::error_code ec;
    fs::rename(tmp_, path_, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot rename " + tmp_ + ": " + ec.message());
  }

  ~Output() {
    if (file_.is_open()) {
      file_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

 private:
  std::string path_, tmp_;
  std::ofstream file_;
};

std::vector<Document> read_documents(const std::string& path, const RecordFormat& format) {
  auto in = open_input(path);
  std::vector<Document> docs;
  std::string line;
  std::uint64_t n = 0;
  while (std::getline(*in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(parse_record(line, format));
    } catch (const Error& e) {
      data_error(path + ":" + std::to_string(n), e.what());
    }
  }
  if (in->bad()) throw Error(ErrorCode::kIo, "read failed: " + path);
  return docs;
}

template <typename F>
void for_each_line(const std::string& path, F&& f) {
  auto in = open_input(path);
  std::string line;
  std::uint64_t n = 0;
  while (std::getline(*in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(line);
    } catch (const Error& e) {
      data_error(path + ":" + std::to_string(n), e.what());
    } catch (const nlohmann::json::exception& e) {
      data_error(path + ":" + std::to_string(n), e.what());
    }
  }
  if (in->bad()) throw Error(ErrorCode::kIo, "read failed: " + path);
}

nlohmann::ordered_json summary_json(const StreamSummary& s) {
  nlohmann::ordered_json j;
  j["documents"] = s.documents;
  j["duplicates"] = s.duplicates;
  j["errors"] = s.errors;
  j["wall_clock_seconds"] = s.total_seconds;
  j["extract_seconds"] = s.extract_seconds;
  j["index_seconds"] = s.index_seconds;
  j["index_bytes"] = s.index_bytes;
  return j;
}

std::string format_number(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared dedup flags

struct DedupFlags {
  DedupConfig config;
  std::string method = "lshbloom";
  std::string unit = "word";
  std::string weighting = "characters";
  std::vector<std::string> inputs;
  std::string output;
  std::string index;
  std::string report;
  std::string id_field = "id";
  std::string text_field = "text";
  std::size_t workers = 0;
  bool force_params = false;

  // Options whose explicit use is checked against a loaded index.
  std::vector<std::pair<CLI::Option*, std::string>> index_bound;
};

void add_dedup_flags(CLI::App* cmd, DedupFlags& f, bool with_method) {
  if (with_method) {
    cmd->add_option("-m,--method", f.method, "lshbloom | classic_lsh | paragraph | ngram")
        ->check(CLI::IsMember({"lshbloom", "classic_lsh", "paragraph", "ngram"}))
        ->capture_default_str();
  }
  auto* t = cmd->add_option("-t,--threshold", f.config.threshold, "Similarity / overlap threshold T")
                ->check(CLI::Range(0.0, 1.0))
                ->capture_default_str();
  auto* np = cmd->add_option("--num-perm", f.config.num_perm, "MinHash permutations")
                 ->check(CLI::Range(2, 1 << 16))
                 ->capture_default_str();
  cmd->add_option("--shingle-size", f.config.shingle_size, "Shingle length in units")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--shingle-unit", f.unit, "word | char")->check(CLI::IsMember({"word", "char"}))->capture_default_str();
  cmd->add_option("--ngram-size", f.config.ngram_size, "n for the n-gram baseline")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* fp = cmd->add_option("--fp-rate", f.config.fp_rate,
                             "LSHBloom: effective false-positive rate; baselines: filter rate (0 = exact set)")
                 ->check(CLI::Range(0.0, 1.0))
                 ->capture_default_str();
  auto* nd = cmd->add_option("--expected-docs", f.config.expected_docs, "Index capacity in documents")
                 ->check(CLI::PositiveNumber)
                 ->capture_default_str();
  cmd->add_option("--expected-items", f.config.expected_items,
                  "Baseline filter capacity in paragraphs / n-grams (0 = expected-docs)")
      ->capture_default_str();
  cmd->add_option("--weighting", f.weighting, "Paragraph fraction weighting: characters | count")
      ->check(CLI::IsMember({"characters", "count"}))
      ->capture_default_str();
  auto* seed = cmd->add_option("--seed", f.config.seed, "Hash seed")->capture_default_str();
  cmd->add_option("--id-field", f.id_field, "Record id field")->capture_default_str();
  cmd->add_option("--text-field", f.text_field, "Record text field")->capture_default_str();
  cmd->add_option("-w,--workers", f.workers, "Extraction threads (0 = LSHBLOOM_WORKERS or all cores)")
      ->capture_default_str();
  f.index_bound = {{t, "threshold"}, {np, "num-perm"}, {fp, "fp-rate"}, {nd, "expected-docs"}, {seed, "seed"}};
}

DedupConfig finish_config(DedupFlags& f) {
  DedupConfig c = f.config;
  c.method = parse_method(f.method);
  c.shingle_unit = f.unit == "char" ? ShingleUnit::kChar : ShingleUnit::kWord;
  c.weighting = f.weighting == "count" ? OverlapWeighting::kCount : OverlapWeighting::kCharacters;
  if (c.method == Method::kLshBloom) {
    require(c.fp_rate > 0.0 && c.fp_rate < 1.0, ErrorCode::kConfiguration,
            "--fp-rate must be in (0, 1) for lshbloom");
  }
  return c;
}

// Flags that disagree with a loaded index are an error unless forced.
void check_against_index(const DedupFlags& f, const DedupConfig& c, const LshBloomIndex& index) {
  const LshParams& p = index.params();
  const LshParams wanted = c.lsh_params();
  std::vector<std::string> conflicts;
  for (const auto& [opt, name] : f.index_bound) {
    if (opt->count() == 0) continue;
    bool differs = false;
    if (name == "threshold") differs = c.threshold != p.threshold;
    if (name == "num-perm") differs = c.num_perm != p.num_perm;
    if (name == "fp-rate") differs = c.fp_rate != index.p_effective();
    if (name == "expected-docs") differs = c.expected_docs != index.capacity();
    if (name == "seed") differs = wanted.signature_seed != p.signature_seed || wanted.band_hash_seed != p.band_hash_seed;
    if (differs) conflicts.push_back("--" + name);
  }
  if (conflicts.empty() || f.force_params) return;
  std::string msg = "flags conflict with the parameters stored in the index:";
  for (const auto& c2 : conflicts) msg += " " + c2;
  msg += " (the index parameters apply; pass --force-params to proceed)";
  throw Error(ErrorCode::kConfiguration, msg);
}

std::unique_ptr<Deduplicator> make_deduplicator(DedupFlags& f, const DedupConfig& c, bool index_must_exist) {
  if (!f.index.empty() && fs::exists(f.index)) {
    require(c.method == Method::kLshBloom, ErrorCode::kConfiguration, "--index is only supported with lshbloom");
    LshBloomIndex index = LshBloomIndex::load(f.index);
    check_against_index(f, c, index);
    return std::make_unique<Deduplicator>(c, std::move(index));
  }
  if (index_must_exist) throw Error(ErrorCode::kIo, "index not found: " + f.index);
  if (!f.index.empty()) {
    require(c.method == Method::kLshBloom, ErrorCode::kConfiguration, "--index is only supported with lshbloom");
  }
  return std::make_unique<Deduplicator>(c);
}

int run_stream(DedupFlags& f, StreamMode mode) {
  DedupConfig c = finish_config(f);
  auto dedup = make_deduplicator(f, c, mode == StreamMode::kProbe);
  if (f.inputs.empty()) f.inputs.push_back("-");

  Output out(mode == StreamMode::kInsert ? std::string{} : f.output);
  StreamOptions opt;
  opt.format = RecordFormat{f.id_field, f.text_field};
  opt.workers = f.workers;
  opt.mode = mode;
  StreamSummary summary;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& path : f.inputs) {
    auto in = open_input(path);
    opt.source = path;
    dedup_stream(
        *in, *dedup, opt, [&](const DedupDecision& d) { out.stream() << format_decision(d) << '\n'; },
        [](const RecordError& e) { std::cerr << format_error(e) << '\n'; }, summary);
  }
  if (mode != StreamMode::kInsert) out.commit();
  if (!f.index.empty() && mode != StreamMode::kProbe) dedup->bloom_index()->save(f.index);
  summary.index_bytes = dedup->index_bytes();
  summary.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string report = summary_json(summary).dump();
  if (!f.report.empty()) {
    Output r(f.report);
    r.stream() << report << '\n';
    r.commit();
  }
  std::cerr << report << '\n';
  return summary.errors == 0 ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// Subcommands

struct PlanFlags {
  std::uint64_t docs = 0;
  double p_effective = 1e-5;
  double threshold = 0.8;
  std::size_t num_perm = 128;
  std::string format = "text";
};

int run_plan(const PlanFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const CapacityPlan c = plan(f.docs, f.p_effective, f.threshold, f.num_perm);
  if (f.format == "json") {
    nlohmann::ordered_json j;
    j["docs"] = c.n_docs;
    j["p_effective"] = c.p_effective;
    j["threshold"] = c.threshold;
    j["num_perm"] = c.num_perm;
    j["bands"] = c.bands;
    j["rows"] = c.rows;
    j["per_filter_p"] = c.per_filter_p;
    j["per_filter_bits"] = c.per_filter_bits;
    j["per_filter_probes"] = c.per_filter_probes;
    j["total_bytes"] = c.total_bytes;
    j["file_bytes"] = c.file_bytes();
    j["total_gb"] = c.total_gb();
    j["total_tb"] = c.total_tb();
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "documents        " << c.n_docs << '\n'
              << "p_effective      " << c.p_effective << '\n'
              << "threshold        " << c.threshold << '\n'
              << "num_perm         " << c.num_perm << '\n'
              << "bands            " << c.bands << '\n'
              << "rows             " << c.rows << '\n'
              << "per_filter_p     " << std::setprecision(6) << c.per_filter_p << '\n'
              << "per_filter_bits  " << c.per_filter_bits << '\n'
              << "probes           " << c.per_filter_probes << '\n'
              << "total_bytes      " << c.total_bytes << '\n'
              << "file_bytes       " << c.file_bytes() << '\n'
              << "total_size       " << format_number(c.total_gb(), 2) << " GB ("
              << format_number(c.total_tb(), 2) << " TB)\n";
  }
  std::cerr << "plan computed in " << format_number(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3)
            << " s\n";
  return kExitOk;
}

struct SynthFlags {
  std::string base;
  std::uint64_t random_docs = 0;
  std::size_t words = 60;
  std::size_t vocabulary = 50000;
  std::size_t duplicates = 0;
  double dropout = 0.05;
  std::uint64_t seed = 1;
  std::string output;
  std::string labels;
  std::string id_field = "id";
  std::string text_field = "text";
};

int run_synth(const SynthFlags& f) {
  const RecordFormat format{f.id_field, f.text_field};
  std::vector<Document> base =
      f.base.empty() ? random_corpus(f.random_docs, f.seed, CorpusShape{f.words, f.vocabulary})
                     : read_documents(f.base, format);
  const LabeledCorpus corpus = synthesize_benchmark(std::move(base), f.duplicates, f.dropout, f.seed);
  Output docs(f.output);
  for (const auto& d : corpus.documents) docs.stream() << format_record(d, format) << '\n';
  if (!f.labels.empty()) {
    Output labels(f.labels);
    for (const auto& d : corpus.documents) labels.stream() << format_label(d.id, corpus.labels.at(d.id)) << '\n';
    labels.commit();
  }
  docs.commit();
  return kExitOk;
}

struct EvalFlags {
  std::string decisions;
  std::string labels;
  std::string run_report;
};

int run_eval(const EvalFlags& f) {
  std::unordered_map<std::string, Label> labels;
  for_each_line(f.labels, [&](const std::string& line) {
    auto [id, label] = parse_label(line);
    labels[id] = std::move(label);
  });
  std::vector<DedupDecision> decisions;
  for_each_line(f.decisions, [&](const std::string& line) { decisions.push_back(parse_decision(line)); });
  EvalReport r;
  try {
    r = evaluate(decisions, labels);
  } catch (const Error& e) {
    data_error(f.decisions, e.what());
  }
  if (!f.run_report.empty()) {
    for_each_line(f.run_report, [&](const std::string& line) {
      const auto j = nlohmann::json::parse(line);
      r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
      r.index_bytes = j.value("index_bytes", std::uint64_t{0});
    });
  }
  std::cout << format_report(r) << '\n';
  return kExitOk;
}

struct BenchFlags {
  BenchConfig config;
  std::string input;
  std::string methods = "both";
  std::string id_field = "id";
  std::string text_field = "text";
  std::size_t words = 60;
};

int run_bench(BenchFlags& f) {
  f.config.run_lshbloom = f.methods != "classic_lsh";
  f.config.run_classic = f.methods != "lshbloom";
  DocumentSource source;
  std::vector<Document> docs;
  if (!f.input.empty()) {
    docs = read_documents(f.input, RecordFormat{f.id_field, f.text_field});
    const auto largest = *std::max_element(f.config.sizes.begin(), f.config.sizes.end());
    require(docs.size() >= largest, ErrorCode::kConfiguration,
            "input has " + std::to_string(docs.size()) + " documents, fewer than the largest size");
    source = [&docs](std::uint64_t i) { return docs[i]; };
  } else {
    const CorpusShape shape{f.words, 50000};
    const std::uint64_t seed = f.config.seed;
    source = [shape, seed](std::uint64_t i) { return random_document(seed, i, shape); };
  }
  for (const auto& p : run_scaling_bench(f.config, source)) std::cout << format_bench_point(p) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-duplicate detection with MinHash LSH over per-band Bloom filters", "lshbloom"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lshbloom 1.0");

  PlanFlags plan_flags;
  auto* plan_cmd = app.add_subcommand("plan", "Predict index size for a corpus");
  plan_cmd->add_option("-n,--docs", plan_flags.docs, "Documents to index")->required()->check(CLI::PositiveNumber);
  plan_cmd->add_option("-p,--p-effective", plan_flags.p_effective, "Effective false-positive rate")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  plan_cmd->add_option("-t,--threshold", plan_flags.threshold, "Similarity threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  plan_cmd->add_option("--num-perm", plan_flags.num_perm, "MinHash permutations")
      ->check(CLI::Range(2, 1 << 16))
      ->capture_default_str();
  plan_cmd->add_option("--format", plan_flags.format, "text | json")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  DedupFlags dedup_flags;
  auto* dedup_cmd = app.add_subcommand("dedup", "Deduplicate record files (first seen wins)");
  add_dedup_flags(dedup_cmd, dedup_flags, true);
  dedup_cmd->add_option("inputs,-i,--input", dedup_flags.inputs, "Record files ('-' = stdin)");
  dedup_cmd->add_option("-o,--output", dedup_flags.output, "Decision file (default stdout)");
  dedup_cmd->add_option("--index", dedup_flags.index, "LSHBloom index file: loaded if present, saved after the run");
  dedup_cmd->add_flag("--force-params", dedup_flags.force_params, "Let a loaded index override conflicting flags");
  dedup_cmd->add_option("--report", dedup_flags.report, "Write the run summary here");

  DedupFlags build_flags;
  auto* build_cmd = app.add_subcommand("build", "Insert record files into an LSHBloom index");
  add_dedup_flags(build_cmd, build_flags, false);
  build_cmd->add_option("inputs,-i,--input", build_flags.inputs, "Record files ('-' = stdin)");
  build_cmd->add_option("--index", build_flags.index, "Index file (extended if present)")->required();
  build_cmd->add_flag("--force-params", build_flags.force_params, "Let a loaded index override conflicting flags");
  build_cmd->add_option("--report", build_flags.report, "Write the run summary here");

  DedupFlags query_flags;
  auto* query_cmd = app.add_subcommand("query", "Check records against a saved index without inserting");
  add_dedup_flags(query_cmd, query_flags, false);
  query_cmd->add_option("inputs,-i,--input", query_flags.inputs, "Record files ('-' = stdin)");
  query_cmd->add_option("--index", query_flags.index, "Index file")->required();
  query_cmd->add_option("-o,--output", query_flags.output, "Decision file (default stdout)");
  query_cmd->add_flag("--force-params", query_flags.force_params, "Let the index override conflicting flags");

  SynthFlags synth_flags;
  auto* synth_cmd = app.add_subcommand("synth", "Make a labeled benchmark with planted near-duplicates");
  auto* base_opt = synth_cmd->add_option("--base", synth_flags.base, "Base record file");
  auto* random_opt = synth_cmd->add_option("--random", synth_flags.random_docs, "Generate N random base documents");
  base_opt->excludes(random_opt);
  synth_cmd->add_option("--words", synth_flags.words, "Mean words per random document")->capture_default_str();
  synth_cmd->add_option("--vocabulary", synth_flags.vocabulary, "Random vocabulary size")->capture_default_str();
  synth_cmd->add_option("-d,--duplicates", synth_flags.duplicates, "Near-duplicates to plant")->capture_default_str();
  synth_cmd->add_option("--dropout", synth_flags.dropout, "Per-token drop probability")->capture_default_str();
  synth_cmd->add_option("--seed", synth_flags.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("-o,--output", synth_flags.output, "Record file (default stdout)");
  synth_cmd->add_option("-l,--labels", synth_flags.labels, "Label file");
  synth_cmd->add_option("--id-field", synth_flags.id_field)->capture_default_str();
  synth_cmd->add_option("--text-field", synth_flags.text_field)->capture_default_str();

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "Score decisions against labels");
  eval_cmd->add_option("--decisions", eval_flags.decisions, "Decision file")->required();
  eval_cmd->add_option("--labels", eval_flags.labels, "Label file")->required();
  eval_cmd->add_option("--run-report", eval_flags.run_report, "Run summary to copy wall time and index bytes from");

  BenchFlags bench_flags;
  auto* bench_cmd = app.add_subcommand("bench", "Index size and time over growing corpus prefixes");
  bench_cmd->add_option("--sizes", bench_flags.config.sizes, "Prefix sizes")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("-t,--threshold", bench_flags.config.threshold)->capture_default_str();
  bench_cmd->add_option("--num-perm", bench_flags.config.num_perm)->capture_default_str();
  bench_cmd->add_option("-p,--p-effective", bench_flags.config.p_effective)->capture_default_str();
  bench_cmd->add_option("--seed", bench_flags.config.seed)->capture_default_str();
  bench_cmd->add_option("-w,--workers", bench_flags.config.workers)->capture_default_str();
  bench_cmd->add_option("--methods", bench_flags.methods, "both | lshbloom | classic_lsh")
      ->check(CLI::IsMember({"both", "lshbloom", "classic_lsh"}))
      ->capture_default_str();
  bench_cmd->add_option("--input", bench_flags.input, "Record file (default: random synthetic corpus)");
  bench_cmd->add_option("--words", bench_flags.words, "Mean words per random document")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  std::ios::sync_with_stdio(false);
  try {
    if (*plan_cmd) return run_plan(plan_flags);
    if (*dedup_cmd) return run_stream(dedup_flags, StreamMode::kDedup);
    if (*build_cmd) return run_stream(build_flags, StreamMode::kInsert);
    if (*query_cmd) return run_stream(query_flags, StreamMode::kProbe);
    if (*synth_cmd) {
      if (synth_flags.base.empty() && synth_flags.random_docs == 0) {
        std::cerr << "synth: one of --base or --random is required\n";
        return kExitUsage;
      }
      return run_synth(synth_flags);
    }
    if (*eval_cmd) return run_eval(eval_flags);
    if (*bench_cmd) return run_bench(bench_flags);
  } catch (const Error& e) {
    std::cerr << "lshbloom: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "lshbloom: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
