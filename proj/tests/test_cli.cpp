#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "derivscope/manifest.hpp"
#include "derivscope/report.hpp"
#include "derivscope/surface_stats.hpp"
#include "support.hpp"

using testing::cli;
using testing::read_file;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return (testing::kFixtures / name).string(); }

std::vector<std::vector<std::string>> tsv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// Parses the fixture corpus, filters it, parses the analysis outputs and
// writes the report into dir/report.
testing::CliRun pipeline(const TempDir& dir, const std::vector<std::string>& extra = {}) {
  const auto d = dir.path().string();
  auto step = [&](std::vector<std::string> args) {
    args.insert(args.end(), {"--out-dir", d});
    const auto r = cli(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
  };
  step({"parse", "--in", fixture("corpus.en"), "--out", dir / "refs.jsonl"});
  step({"filter-corpus", "--src", fixture("corpus.fr"), "--ref-text", fixture("corpus.en"), "--ref", dir / "refs.jsonl",
        "--hyp", fixture("corpus.hyp"), "--scores", fixture("corpus.scores"), "--valid-size", "50", "--analysis-size",
        "250"});
  step({"parse", "--in", dir / "analysis.hyp.txt", "--out", dir / "analysis.nmt.jsonl"});
  std::vector<std::string> report = {"report",         "--src",           dir / "analysis.src.txt",
                                     "--ref-text",     dir / "analysis.ref.txt",
                                     "--hyp",          dir / "analysis.hyp.txt",
                                     "--scores",       dir / "analysis.scores",
                                     "--ref",          dir / "analysis.ref.jsonl",
                                     "--nmt",          dir / "analysis.nmt.jsonl",
                                     "--train-src",    dir / "train.src.txt",
                                     "--train-ref",    dir / "train.ref.txt",
                                     "--descriptions", fixture("rule_descriptions.tsv"),
                                     "--min-ref-count", "20",
                                     "--c",            "1",
                                     "--out-dir",      dir / "report"};
  report.insert(report.end(), extra.begin(), extra.end());
  return cli(report);
}

}  // namespace

TEST_CASE("stats roots on the four-result fixtures") {
  TempDir dir;
  const auto r = cli({"stats", "roots", "--ref", fixture("roots4_ref.jsonl"), "--nmt", fixture("roots4_nmt.jsonl"),
                      "--out-dir", dir.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto t = tsv(dir / "table1_roots.tsv");
  REQUIRE(t.size() == 4);
  CHECK(t[0] == std::vector<std::string>{"source", "strict_full", "strict_frag", "informal_full", "informal_frag",
                                         "unparseable"});
  CHECK(t[1] == std::vector<std::string>{"ref", "50.0", "25.0", "25.0", "0.0", "0.0"});
  CHECK(t[2] == std::vector<std::string>{"nmt", "50.0", "0.0", "25.0", "0.0", "25.0"});
  CHECK(fs::exists(dir / "manifest.stats-roots.json"));
}

TEST_CASE("error exits") {
  TempDir dir;
  SUBCASE("missing input names the path and exits 2") {
    const auto r = cli({"stats", "roots", "--ref", dir / "nope.jsonl", "--nmt", fixture("roots4_nmt.jsonl"),
                        "--out-dir", dir.path().string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("nope.jsonl") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "table1_roots.tsv"));
  }
  SUBCASE("unknown flag exits 1 with usage") {
    const auto r = cli({"stats", "roots", "--bogus"});
    CHECK(r.code == 1);
    CHECK(r.err.find("Usage") != std::string::npos);
  }
  SUBCASE("missing required input exits 1") {
    const auto r = cli({"stats", "roots", "--ref", fixture("roots4_ref.jsonl"), "--out-dir", dir.path().string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("--nmt") != std::string::npos);
  }
  SUBCASE("help exits 0") { CHECK(cli({"--help"}).code == 0); }
  SUBCASE("unknown config key exits 1") {
    testing::write_file(dir / "cfg", "seed = 3\nno-such-key = 1\n");
    const auto r = cli({"--config", dir / "cfg", "stats", "roots", "--ref", fixture("roots4_ref.jsonl"), "--nmt",
                        fixture("roots4_nmt.jsonl"), "--out-dir", dir.path().string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("no-such-key") != std::string::npos);
  }
  SUBCASE("malformed derivation corpus exits 2 naming the line") {
    testing::write_file(dir / "bad.jsonl", "{\"id\":0,\"outcome\":\"exhausted\",\"root\":null,\"tree\":null}\n{oops\n");
    const auto r = cli({"stats", "roots", "--ref", dir / "bad.jsonl", "--nmt", fixture("roots4_nmt.jsonl"),
                        "--out-dir", dir.path().string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("bad.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("config file supplies flags; command line wins") {
  TempDir dir;
  testing::write_file(dir / "cfg", "# shared settings\nref = " + fixture("roots4_ref.jsonl") + "\n--nmt = " +
                                       fixture("roots4_ref.jsonl") + "\n");
  const auto r = cli({"--config", dir / "cfg", "stats", "roots", "--nmt", fixture("roots4_nmt.jsonl"), "--out-dir",
                      dir.path().string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(tsv(dir / "table1_roots.tsv")[2][5] == "25.0");
  const auto m = nlohmann::json::parse(read_file(dir / "manifest.stats-roots.json"));
  CHECK(m.at("config").at("nmt") == fixture("roots4_nmt.jsonl"));
  CHECK(m.at("config").at("ref") == fixture("roots4_ref.jsonl"));
}

TEST_CASE("discrim fit is byte-identical across runs") {
  TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    const auto r = cli({"discrim", "fit", "--ref", fixture("roots4_ref.jsonl"), "--nmt", fixture("roots4_nmt.jsonl"),
                        "--c", "1", "--seed", "3", "--out-dir", dir->path().string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
  }
  CHECK(read_file(a / "model.tsv") == read_file(b / "model.tsv"));
  CHECK(read_file(a / "table3_discriminative.tsv") == read_file(b / "table3_discriminative.tsv"));
  const auto m = nlohmann::json::parse(read_file(a / "manifest.discrim-fit.json"));
  CHECK(m.at("seed") == 3);
  CHECK(m.at("outputs").size() == 2);
  for (const auto& o : m.at("outputs")) CHECK(o.at("sha256").get<std::string>().size() == 64);
}

TEST_CASE("full pipeline writes all six artifacts and reruns identically") {
  TempDir dir;
  const auto r = pipeline(dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto out = dir / "report";
  for (auto name : derivscope::kReportFiles) CHECK(fs::exists(fs::path(out) / std::string(name)));

  const auto t1 = tsv(out + "/table1_roots.tsv");
  REQUIRE(t1.size() == 4);
  for (std::size_t row = 1; row <= 2; ++row) {
    double sum = 0;
    for (std::size_t c = 1; c < 6; ++c) {
      REQUIRE(is_number(t1[row][c]));
      sum += std::stod(t1[row][c]);
    }
    CHECK(std::abs(sum - 100.0) <= 0.1);
  }
  CHECK(std::stod(t1[1][5]) == 0.0);

  const auto t2 = tsv(out + "/table2_correlations.tsv");
  REQUIRE(t2.size() == 8);
  CHECK(t2[0] == std::vector<std::string>{"feature", "r", "n_used", "n_excluded"});
  for (std::size_t i = 1; i < 8; ++i) {
    CHECK(t2[i][0] == derivscope::kFeatureNames[i - 1]);
    REQUIRE(is_number(t2[i][1]));
    CHECK(std::abs(std::stod(t2[i][1])) <= 1.0);
  }

  const auto t3 = tsv(out + "/table3_discriminative.tsv");
  REQUIRE(t3.size() >= 2);
  CHECK(t3[0].size() == 7);
  for (std::size_t i = 1; i < t3.size(); ++i) {
    CHECK(t3[i].size() == 7);
    if (!t3[i][2].empty()) CHECK(std::stod(t3[i][2]) > 0.0);
    if (!t3[i][5].empty()) CHECK(std::stod(t3[i][5]) < 0.0);
  }

  const auto f2 = tsv(out + "/fig2_topk.tsv");
  CHECK(f2[0] == std::vector<std::string>{"rule", "count_ref", "count_nmt"});
  CHECK(f2.size() == 11);
  for (std::size_t i = 2; i < f2.size(); ++i) CHECK(std::stoll(f2[i - 1][1]) >= std::stoll(f2[i][1]));

  const auto f3 = tsv(out + "/fig3_ratio.tsv");
  CHECK(f3[0] == std::vector<std::string>{"rank", "rule", "ratio"});
  for (std::size_t i = 1; i < f3.size(); ++i) CHECK(std::stod(f3[i][2]) >= 0.0);

  const auto summary = read_file(out + "/summary.txt");
  CHECK(summary.find("parseable") != std::string::npos);
  CHECK(summary.find("exhausted") != std::string::npos);

  // Rerun from scratch: every artifact digest matches.
  TempDir again;
  REQUIRE(pipeline(again).code == 0);
  for (auto name : derivscope::kReportFiles) {
    CHECK(derivscope::sha256_file(fs::path(out) / std::string(name)) ==
          derivscope::sha256_file(fs::path(again / "report") / std::string(name)));
  }
  const auto m1 = nlohmann::json::parse(read_file(out + "/manifest.report.json"));
  CHECK(m1.at("outputs").size() == derivscope::kReportFiles.size());
}

TEST_CASE("empty analysis set exits 2 with no artifacts") {
  TempDir dir;
  for (auto name : {"e.src", "e.ref", "e.hyp", "e.scores", "e.ref.jsonl", "e.nmt.jsonl"}) testing::write_file(dir / name, "");
  testing::write_file(dir / "t.src", "le chat\n");
  testing::write_file(dir / "t.ref", "the cat\n");
  const auto r = cli({"report", "--src", dir / "e.src", "--ref-text", dir / "e.ref", "--hyp", dir / "e.hyp", "--scores",
                      dir / "e.scores", "--ref", dir / "e.ref.jsonl", "--nmt", dir / "e.nmt.jsonl", "--train-src",
                      dir / "t.src", "--train-ref", dir / "t.ref", "--out-dir", dir / "out"});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  for (auto name : derivscope::kReportFiles) CHECK_FALSE(fs::exists(fs::path(dir / "out") / std::string(name)));
}

TEST_CASE("sample and annotate subcommands") {
  TempDir dir;
  const auto d = dir.path().string();
  testing::write_file(dir / "hyp.txt", "cat the the\nIt is a cat .\nthe the the cat\n");
  REQUIRE(cli({"parse", "--in", dir / "hyp.txt", "--out", dir / "nmt.jsonl", "--out-dir", d}).code == 0);
  const auto s = cli({"sample", "unparseable", "--nmt", dir / "nmt.jsonl", "--hyp", dir / "hyp.txt", "--out-dir", d});
  INFO(s.err);
  REQUIRE(s.code == 0);
  CHECK(s.err.find("only 2 outputs qualified") != std::string::npos);
  const auto rows = tsv(dir / "annotation.tsv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][1] == "cat the the");

  const auto a = cli({"annotate", "summarize", "--in", fixture("annotation_sample.tsv"), "--out-dir", d});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("fixable\t11\n") != std::string::npos);
  CHECK(a.out.find("18.3") != std::string::npos);
  // The unjudged template is incomplete.
  CHECK(cli({"annotate", "summarize", "--in", dir / "annotation.tsv", "--out-dir", d + "/x"}).code == 2);
}

TEST_CASE("outputs never overwrite an input") {
  TempDir dir;
  testing::write_file(dir / "hyp.txt", "a cat\n");
  const auto r = cli({"parse", "--in", dir / "hyp.txt", "--out", dir / "hyp.txt", "--out-dir", dir.path().string()});
  CHECK(r.code != 0);
  CHECK(read_file(dir / "hyp.txt") == "a cat\n");
}
