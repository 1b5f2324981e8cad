#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "derivscope/derivation.hpp"
#include "derivscope/tokens.hpp"

namespace derivscope {

/// A small weighted context-free grammar with rule-labeled productions,
/// parsed bottom-up with CKY plus acyclic unary closure.
class ToyGrammar {
 public:
  struct Rule {
    std::string label;
    int lhs = -1;
    std::vector<int> rhs;  // one or two categories
    double weight = 0.0;
  };

  struct LexEntry {
    int category = -1;
    std::string lexentry;
  };

  struct Start {
    int category = -1;
    Completeness completeness = Completeness::Full;
  };

  /// Throws ConfigError with a line number on malformed text or unary cycles.
  static ToyGrammar parse(std::string_view text);
  static ToyGrammar load(const std::string& path);

  /// The grammar compiled into the library from data/toy_grammar.txt.
  static const ToyGrammar& bundled();

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<Rule>& rules() const { return rules_; }
  const std::vector<Start>& starts() const { return starts_; }
  std::optional<int> category(std::string_view name) const;

  /// Lexical entries of a token; lookup is ASCII case-insensitive.
  const std::vector<LexEntry>* lookup(std::string_view token) const;

 private:
  std::vector<std::string> categories_;
  std::vector<Rule> rules_;
  std::vector<Start> starts_;
  std::map<std::string, std::vector<LexEntry>, std::less<>> lexicon_;
  std::vector<int> unary_order_;  // unary rule indices, children before parents

  friend class ToyParser;
};

struct ToyParseOptions {
  std::chrono::milliseconds timeout{60000};
  /// Chart-size ceiling standing in for the memory limit.
  std::size_t max_chart_entries = 2'000'000;
};

struct ToyParse {
  enum class Status { Ok, NoParse, UnknownToken, ResourceLimit };
  Status status = Status::NoParse;
  std::optional<Derivation> best;
  double derivation_count = 0.0;  // over all start categories, full span
  double best_score = 0.0;
  std::string message;
};

/// Strict iff the first token starts with an uppercase letter and the last
/// token is terminal punctuation.
Formality toy_formality(const Tokens& tokens);

class ToyParser {
 public:
  explicit ToyParser(const ToyGrammar& grammar) : grammar_(&grammar) {}

  ToyParse parse(const Tokens& tokens, const ToyParseOptions& options = {}) const;

 private:
  const ToyGrammar* grammar_;
};

}  // namespace derivscope
