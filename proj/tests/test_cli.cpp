#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lshbloom-cli-" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
  }

  // Runs the CLI with stdout captured; stderr goes to a side file.
  CliResult run(const std::string& args) const {
    const fs::path out = path("stdout.txt");
    const std::string cmd = std::string(LSHBLOOM_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                            path("stderr.txt").string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    return r;
  }

  std::string err() const { return slurp(path("stderr.txt")); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PlanPrintsPublishedSize) {
  const CliResult r = run("plan --docs 5000000000 --p-effective 1e-5 --threshold 0.8 --num-perm 128");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("160.51 GB"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("bands            9"), std::string::npos);

  const CliResult j = run("plan -n 5000000000 -p 1e-10 --format json");
  ASSERT_EQ(j.code, 0);
  const auto doc = nlohmann::json::parse(j.out);
  EXPECT_EQ(doc["bands"], 9);
  EXPECT_EQ(doc["rows"], 13);
  EXPECT_NEAR(doc["total_gb"].get<double>(), 295.30, 0.3);
}

TEST_F(CliTest, DedupTwoIdenticalLines) {
  write("in.jsonl", R"({"id":"a","text":"one two three four five"})" "\n"
                    R"({"id":"b","text":"one two three four five"})" "\n");
  for (const char* method : {"lshbloom", "classic_lsh", "paragraph", "ngram"}) {
    const CliResult r = run(std::string("dedup --method ") + method + " " + path("in.jsonl").string());
    ASSERT_EQ(r.code, 0) << method << err();
    const auto out = lines(r.out);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(nlohmann::json::parse(out[0])["verdict"], "unique") << method;
    EXPECT_EQ(nlohmann::json::parse(out[1])["verdict"], "duplicate") << method;
  }
}

TEST_F(CliTest, DedupIsDeterministicAcrossWorkerCounts) {
  ASSERT_EQ(run("synth --random 400 --duplicates 80 --dropout 0.05 --seed 3 -o " + path("c.jsonl").string() +
                " -l " + path("l.jsonl").string()).code, 0);
  const CliResult a = run("dedup -t 0.6 -w 1 " + path("c.jsonl").string());
  const CliResult b = run("dedup -t 0.6 -w 3 " + path("c.jsonl").string());
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(lines(a.out).size(), 480u);
}

TEST_F(CliTest, MalformedLineGivesDataExitAndContinues) {
  write("in.jsonl", "{oops\n" R"({"id":"a","text":"x y z"})" "\n");
  const CliResult r = run("dedup " + path("in.jsonl").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(lines(r.out).size(), 1u);
  EXPECT_NE(err().find("\"line\":1"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("plan --bogus").code, 1);
  EXPECT_EQ(run("plan").code, 1);
  EXPECT_EQ(run("dedup " + path("missing.jsonl").string()).code, 3);
  write("bad.lshb", "not an index at all, definitely not");
  write("in.jsonl", R"({"id":"a","text":"x y z"})" "\n");
  EXPECT_EQ(run("query --index " + path("bad.lshb").string() + " " + path("in.jsonl").string()).code, 2);
  EXPECT_EQ(run("query --index " + path("none.lshb").string() + " " + path("in.jsonl").string()).code, 3);
}

TEST_F(CliTest, SynthThenEvalPerfectDecisions) {
  ASSERT_EQ(run("synth --random 50 --duplicates 10 --dropout 0 --seed 1 -o " + path("c.jsonl").string() +
                " -l " + path("l.jsonl").string()).code, 0);
  // Decisions that copy the labels exactly.
  std::string decisions;
  for (const auto& l : lines(slurp(path("l.jsonl")))) {
    const auto j = nlohmann::json::parse(l);
    nlohmann::ordered_json d;
    d["id"] = j["id"];
    d["verdict"] = j["label"] == "duplicate" ? "duplicate" : "unique";
    decisions += d.dump() + "\n";
  }
  write("d.jsonl", decisions);
  const CliResult r = run("eval --decisions " + path("d.jsonl").string() + " --labels " + path("l.jsonl").string());
  ASSERT_EQ(r.code, 0) << err();
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(report["f1"].get<double>(), 1.0);
  EXPECT_EQ(report["tp"], 10);
  EXPECT_EQ(report["tn"], 50);
}

TEST_F(CliTest, BuildQueryAndIndexReuse) {
  ASSERT_EQ(run("synth --random 100 --seed 2 -o " + path("c.jsonl").string()).code, 0);
  const std::string idx = path("i.lshb").string();
  const CliResult b = run("build --expected-docs 1000 --index " + idx + " --report " + path("r.json").string() + " " +
                    path("c.jsonl").string());
  ASSERT_EQ(b.code, 0) << err();
  const auto report = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(report["documents"], 100);
  EXPECT_EQ(report["index_bytes"].get<std::uint64_t>(), fs::file_size(idx));

  const CliResult q = run("query --index " + idx + " " + path("c.jsonl").string());
  ASSERT_EQ(q.code, 0) << err();
  for (const auto& l : lines(q.out)) EXPECT_EQ(nlohmann::json::parse(l)["verdict"], "duplicate");
  EXPECT_EQ(fs::file_size(idx), report["index_bytes"].get<std::uint64_t>());

  // Flags that disagree with the stored parameters are refused unless forced.
  EXPECT_EQ(run("dedup --threshold 0.5 --index " + idx + " " + path("c.jsonl").string()).code, 1);
  const CliResult forced = run("dedup --threshold 0.5 --force-params --index " + idx + " " + path("c.jsonl").string());
  EXPECT_EQ(forced.code, 0) << err();
  EXPECT_EQ(lines(forced.out).size(), 100u);
}

TEST_F(CliTest, BenchReportsEachSize) {
  const CliResult r = run("bench --sizes 200,400 --workers 1");
  ASSERT_EQ(r.code, 0) << err();
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), 4u);
  const auto first = nlohmann::json::parse(out[0]);
  EXPECT_EQ(first["docs"], 200);
  EXPECT_EQ(first["method"], "lshbloom");
  EXPECT_EQ(first["payload_bytes"], first["plan_bytes"]);
}
