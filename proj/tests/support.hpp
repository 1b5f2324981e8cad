#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <unistd.h>
#include <vector>

#include "derivscope/cli.hpp"
#include "derivscope/derivation.hpp"
#include "derivscope/discrim.hpp"
#include "derivscope/gateway.hpp"
#include "derivscope/random.hpp"
#include "derivscope/toy_grammar.hpp"

namespace testing {

namespace fs = std::filesystem;

inline const fs::path kFixtures = DERIVSCOPE_FIXTURES;
inline const std::string kMockBackend = DERIVSCOPE_MOCK_BACKEND;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("derivscope-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary);
  out << contents;
}

struct CliRun {
  int code = 0;
  std::string out, err;
};

inline CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = derivscope::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Exhaustive top-down enumeration of every derivation score of a category
/// over a span. Independent of the bottom-up chart: it walks the grammar's
/// rules directly and materializes one score per derivation.
class BruteForceParser {
 public:
  BruteForceParser(const derivscope::ToyGrammar& g, const derivscope::Tokens& tokens) : g_(g), t_(tokens) {}

  const std::vector<double>& scores(int cat, std::size_t i, std::size_t j) {
    const auto key = std::make_tuple(cat, i, j);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::vector<double> out;
    if (j == i + 1) {
      for (const auto& le : *g_.lookup(t_[i])) {
        if (le.category == cat) out.push_back(0.0);
      }
    }
    for (const auto& r : g_.rules()) {
      if (r.lhs != cat) continue;
      if (r.rhs.size() == 1) {
        for (double s : scores(r.rhs[0], i, j)) out.push_back(r.weight + s);
        continue;
      }
      for (std::size_t k = i + 1; k < j; ++k) {
        const auto left = scores(r.rhs[0], i, k);
        if (left.empty()) continue;
        const auto& right = scores(r.rhs[1], k, j);
        for (double a : left) {
          for (double b : right) out.push_back(r.weight + a + b);
        }
      }
    }
    return memo_[key] = std::move(out);
  }

 private:
  const derivscope::ToyGrammar& g_;
  const derivscope::Tokens& t_;
  std::map<std::tuple<int, std::size_t, std::size_t>, std::vector<double>> memo_;
};

struct OracleParse {
  derivscope::ParseOutcome outcome = derivscope::ParseOutcome::Exhausted;
  std::size_t derivations = 0;
  double best_score = 0.0;
  std::optional<derivscope::Completeness> completeness;
};

/// Expected outcome of the toy backend: forced timeout, then lexical lookup,
/// then exhaustive enumeration over the start categories.
inline OracleParse oracle_parse(const derivscope::ToyGrammar& g, const derivscope::Tokens& tokens,
                                std::int64_t timeout_ms) {
  OracleParse o;
  if (timeout_ms <= 0) {
    o.outcome = derivscope::ParseOutcome::ResourceLimit;
    return o;
  }
  for (const auto& t : tokens) {
    if (!g.lookup(t)) {
      o.outcome = derivscope::ParseOutcome::ParserError;
      return o;
    }
  }
  if (tokens.empty()) return o;
  BruteForceParser bf(g, tokens);
  for (const auto& s : g.starts()) {
    const auto& all = bf.scores(s.category, 0, tokens.size());
    o.derivations += all.size();
    for (double v : all) {
      if (!o.completeness || v > o.best_score) {
        o.best_score = v;
        o.completeness = s.completeness;
      }
    }
  }
  if (o.derivations > 0) o.outcome = derivscope::ParseOutcome::Parseable;
  return o;
}

/// Seeded sentences over the toy lexicon: grammatical, scrambled, with an
/// unknown word, and empty.
inline std::vector<derivscope::Tokens> toy_corpus(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> words = {"the", "a", "cat", "dog", "sees", "sleeps", "is", "good", "very",
                                          "it",  "we", "on",  "mat", "and", "europe", "two", "members", ".",
                                          ";",   "vote", "this", "report", "in", "new"};
  const std::vector<std::vector<std::string>> templates = {
      {"the", "cat", "sleeps", "."},
      {"It", "is", "a", "cat", "."},
      {"a", "cat"},
      {"we", "vote", "on", "the", "report"},
      {"The", "dog", "sees", "a", "very", "good", "cat", "on", "the", "mat", "."},
      {"i", "repeat", ";", "you", "are", "quite", "right", "."},
      {"two", "members", "vote", "and", "europe", "sleeps"},
      {"on", "the", "mat"},
      {"this", "report", "is", "new", "."},
  };
  derivscope::SeededRng rng(seed);
  std::vector<derivscope::Tokens> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = rng.below(10);
    if (kind < 4) {
      out.push_back(templates[rng.below(templates.size())]);
    } else if (kind < 8) {
      derivscope::Tokens s;
      const auto len = 1 + rng.below(7);
      for (std::uint64_t k = 0; k < len; ++k) s.push_back(words[rng.below(words.size())]);
      out.push_back(std::move(s));
    } else if (kind < 9) {
      auto s = templates[rng.below(templates.size())];
      s[rng.below(s.size())] = "zyzzyva";
      out.push_back(std::move(s));
    } else {
      out.push_back({});
    }
  }
  return out;
}

/// Rows with `rules` columns; the first `planted` columns appear with a
/// class-dependent rate (alternating direction), the rest are noise.
inline derivscope::RuleDataset planted_dataset(std::size_t rows, std::size_t rules, std::size_t planted,
                                               std::uint64_t seed) {
  derivscope::SeededRng rng(seed);
  derivscope::RuleDataset d;
  for (std::size_t j = 0; j < rules; ++j) d.features.push_back("rule_" + std::to_string(100 + j));
  std::vector<Eigen::Triplet<double>> trips;
  d.y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const double y = rng.below(2) ? 1.0 : -1.0;
    d.y(static_cast<Eigen::Index>(i)) = y;
    for (std::size_t j = 0; j < rules; ++j) {
      double p = 0.3;
      if (j < planted) {
        const bool favours_ref = j % 2 == 0;
        p = ((y > 0) == favours_ref) ? 0.7 : 0.1;
      }
      if (rng.unit() < p) {
        trips.emplace_back(static_cast<int>(i), static_cast<int>(j), static_cast<double>(1 + rng.below(2)));
      }
    }
  }
  d.x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rules));
  d.x.setFromTriplets(trips.begin(), trips.end());
  return d;
}

}  // namespace testing
