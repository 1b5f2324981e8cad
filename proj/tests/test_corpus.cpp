#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "derivscope/corpus.hpp"
#include "derivscope/errors.hpp"
#include "support.hpp"

using namespace derivscope;
using testing::TempDir;
using testing::write_file;

TEST_CASE("load_parallel aligns by line") {
  TempDir dir;
  write_file(dir / "s", "le chat\n");
  write_file(dir / "t", "the cat\n");
  const auto ex = load_parallel(dir / "s", dir / "t");
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].id == 0);
  CHECK(ex[0].source == Tokens{"le", "chat"});
  CHECK(ex[0].reference == Tokens{"the", "cat"});
  CHECK_FALSE(ex[0].output);
}

TEST_CASE("load_parallel preserves order and flags empty lines") {
  TempDir dir;
  write_file(dir / "s", "a\n\nb\n");
  write_file(dir / "t", "x\ny\nz\n");
  const auto ex = load_parallel(dir / "s", dir / "t");
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].id == 0);
  CHECK(ex[1].id == 1);
  CHECK(ex[2].id == 2);
  CHECK(ex[1].source.empty());
  CHECK(ex[1].has_empty_side());
  CHECK_FALSE(ex[0].has_empty_side());
}

TEST_CASE("load_parallel line-count mismatch names both counts") {
  TempDir dir;
  write_file(dir / "s", "a\nb\n");
  write_file(dir / "t", "x\ny\nz\n");
  try {
    load_parallel(dir / "s", dir / "t");
    FAIL("expected an alignment error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("invalid UTF-8 is reported with its line number") {
  std::istringstream in("fine\nalso fine\nbad \xC3\x28 byte\n");
  try {
    read_sentences(in, "in.txt");
    FAIL("expected a decode error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  CHECK(find_invalid_utf8("caf\xC3\xA9") == std::string::npos);
  CHECK(find_invalid_utf8("\xC0\xAF") == 0);          // overlong
  CHECK(find_invalid_utf8("ab\xED\xA0\x80") == 2);    // surrogate
}

TEST_CASE("missing corpus file is a data error") {
  CHECK_THROWS_AS(read_sentences("/nonexistent/derivscope/corpus.txt"), DataError);
}

TEST_CASE("scores: blank means unavailable; positive or non-finite is rejected") {
  std::istringstream ok("-1.5\n\n-0\n");
  const auto s = read_scores(ok, "s");
  REQUIRE(s.size() == 3);
  CHECK(*s[0] == -1.5);
  CHECK_FALSE(s[1]);
  CHECK(*s[2] == 0.0);
  std::istringstream pos("0.5\n");
  CHECK_THROWS_AS(read_scores(pos, "s"), DataError);
  std::istringstream inf("-inf\n");
  CHECK_THROWS_AS(read_scores(inf, "s"), DataError);
  std::istringstream junk("abc\n");
  CHECK_THROWS_AS(read_scores(junk, "s"), DataError);
}

TEST_CASE("build_vocab ranks by count then token") {
  SUBCASE("counts 2 and 1") {
    const auto v = build_vocab({{"a", "a", "b"}}, 2);
    CHECK(v.rank("a") == 1u);
    CHECK(v.rank("b") == 2u);
  }
  SUBCASE("tie broken lexicographically") {
    const auto v = build_vocab({{"b", "a"}}, 1);
    REQUIRE(v.size() == 1);
    CHECK(v.rank("a") == 1u);
    CHECK_FALSE(v.contains("b"));
  }
  SUBCASE("threshold cut") {
    const auto v = build_vocab({{"a", "a", "b", "b", "c"}}, 2);
    CHECK(v.size() == 2);
    CHECK(v.rank("a") == 1u);
    CHECK(v.rank("b") == 2u);
    CHECK_FALSE(v.contains("c"));
  }
  SUBCASE("empty input is an empty vocabulary") {
    CHECK(build_vocab({}, 5).size() == 0);
    CHECK(build_vocab({{}, {}}, 5).size() == 0);
  }
}

TEST_CASE("vocabulary ranking matches an independent sort and is a bijection") {
  const auto corpus = testing::toy_corpus(300, 11);
  const auto v = build_vocab(corpus, 15);
  std::map<std::string, std::int64_t> counts;
  for (const auto& s : corpus) {
    for (const auto& t : s) ++counts[t];
  }
  std::vector<std::pair<std::string, std::int64_t>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  REQUIRE(v.size() == std::min<std::size_t>(15, sorted.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(v.entries()[i].token == sorted[i].first);
    CHECK(v.entries()[i].count == sorted[i].second);
    CHECK(v.rank(sorted[i].first) == i + 1);
  }
  const auto again = build_vocab(corpus, 15);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(again.entries()[i].token == v.entries()[i].token);
}

TEST_CASE("vocabulary file round trip") {
  const auto v = build_vocab({{"the", "the", "cat", "<unk>"}}, 10);
  std::stringstream ss;
  write_vocab(ss, v);
  CHECK(ss.str() == "the\t2\t1\n<unk>\t1\t2\ncat\t1\t3\n");
  const auto back = read_vocab(ss, "v.tsv");
  REQUIRE(back.size() == 3);
  CHECK(back.rank("cat") == 3u);
  std::istringstream bad("the\t2\t2\n");
  CHECK_THROWS_AS(read_vocab(bad, "bad.tsv"), DataError);
}

TEST_CASE("apply_source_unk") {
  const Vocabulary v({{"the", 1}});
  CHECK(apply_source_unk({"the", "dog"}, v) == Tokens{"the", "<unk>"});
  CHECK(apply_source_unk({}, v).empty());
  CHECK(apply_source_unk({"the", "<unk>"}, v) == Tokens{"the", "<unk>"});
  const Tokens once = apply_source_unk({"a", "the", "b"}, v);
  CHECK(apply_source_unk(once, v) == once);
  CHECK(once.size() == 3);
}

TEST_CASE("apply_typed_target_unk") {
  const Vocabulary v({{"a", 3}, {"situation", 1}});
  SUBCASE("rare adjective becomes generic_adj") {
    CHECK(apply_typed_target_unk({"a", "grotesque", "situation"}, v, {"det", "adj", "noun"}) ==
          Tokens{"a", "generic_adj", "situation"});
  }
  SUBCASE("all tokens in vocabulary are unchanged") {
    CHECK(apply_typed_target_unk({"a", "situation"}, v, {"det", "noun"}) == Tokens{"a", "situation"});
  }
  SUBCASE("rare token without a lexical entry falls back to <unk>") {
    CHECK(apply_typed_target_unk({"a", "grotesque"}, v, {"det", ""}) == Tokens{"a", "<unk>"});
  }
  SUBCASE("classes outside the configured set fall back to <unk>") {
    CHECK(apply_typed_target_unk({"a", "and"}, v, {"det", "conj"}) == Tokens{"a", "<unk>"});
    TypedUnkOptions only_nouns;
    only_nouns.classes = {"noun"};
    CHECK(apply_typed_target_unk({"grotesque"}, v, {"adj"}, only_nouns) == Tokens{"<unk>"});
  }
  SUBCASE("ERG-style type names map to coarse classes") {
    CHECK(coarse_lexical_class("aj_-_i_le") == "adj");
    CHECK(coarse_lexical_class("n_-_c_le") == "noun");
    CHECK(coarse_lexical_class("v_np_le") == "verb");
    CHECK(coarse_lexical_class("av_-_i-vp_le") == "adv");
    CHECK(coarse_lexical_class("card_le") == "card");
    CHECK(coarse_lexical_class("p_np_i_le") == "prep");
    CHECK(coarse_lexical_class("d_-_the_le") == "");
  }
}

namespace {
ParseResult result(std::int64_t id, ParseOutcome o) {
  ParseResult r;
  r.id = id;
  r.outcome = o;
  if (o == ParseOutcome::Parseable) {
    r.derivation = Derivation{"root_informal", {Formality::Informal, Completeness::Fragment},
                              DerivationNode::rule("np_frg", {DerivationNode::leaf("x", "noun")})};
    r.lexentries = std::vector<std::string>{"noun"};
  }
  return r;
}

std::vector<ParallelExample> examples(std::size_t n) {
  std::vector<ParallelExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ParallelExample e;
    e.id = static_cast<std::int64_t>(i);
    e.source = {"s" + std::to_string(i)};
    e.reference = {"x"};
    out.push_back(e);
  }
  return out;
}
}  // namespace

TEST_CASE("filter_parseable keeps parseable references in order") {
  const auto ex = examples(3);
  std::map<std::int64_t, ParseResult> res{{0, result(0, ParseOutcome::Parseable)},
                                          {1, result(1, ParseOutcome::Exhausted)},
                                          {2, result(2, ParseOutcome::Parseable)}};
  const auto f = filter_parseable(ex, res);
  REQUIRE(f.examples.size() == 2);
  CHECK(f.examples[0].id == 0);
  CHECK(f.examples[1].id == 2);
  CHECK(f.reference_derivations.size() == 2);

  for (auto& [id, r] : res) r = result(id, ParseOutcome::Parseable);
  CHECK(filter_parseable(ex, res).examples.size() == 3);
  for (auto& [id, r] : res) r = result(id, ParseOutcome::ParserError);
  CHECK(filter_parseable(ex, res).examples.empty());

  res.erase(1);
  CHECK_THROWS_AS(filter_parseable(ex, res), DataError);
}

TEST_CASE("split_dataset partitions deterministically") {
  const auto ex = examples(10);
  const SplitSpec spec{8, 1, 1, 7};
  const auto a = split_dataset(ex, spec);
  CHECK(a.train.size() == 8);
  CHECK(a.valid.size() == 1);
  CHECK(a.analysis.size() == 1);
  std::set<std::int64_t> ids;
  for (const auto* part : {&a.train, &a.valid, &a.analysis}) {
    for (const auto& e : *part) CHECK(ids.insert(e.id).second);
  }
  CHECK(ids.size() == 10);

  const auto b = split_dataset(ex, spec);
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].id == b.train[i].id);
  CHECK(a.valid[0].id == b.valid[0].id);

  CHECK_THROWS_AS(split_dataset(ex, SplitSpec{9, 1, 1, 7}), ConfigError);
}

TEST_CASE("split sizes with a remainder part") {
  const auto spec = SplitSpec::with_remainder(100, std::nullopt, 5, 20, 3);
  CHECK(spec.train == 75);
  CHECK(spec.valid == 5);
  CHECK(spec.analysis == 20);
  CHECK_THROWS_AS(SplitSpec::with_remainder(10, std::nullopt, 8, 8, 0), ConfigError);
}
