#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "derivscope/derivation.hpp"
#include "derivscope/tokens.hpp"
#include "derivscope/toy_grammar.hpp"

namespace derivscope {

enum class ParseOutcome { Parseable, ResourceLimit, ParserError, Exhausted };

inline constexpr std::array<ParseOutcome, 4> kAllOutcomes = {
    ParseOutcome::Parseable, ParseOutcome::ResourceLimit, ParseOutcome::ParserError, ParseOutcome::Exhausted};

std::string_view to_string(ParseOutcome o);
/// Throws DataError on unknown names.
ParseOutcome outcome_from_string(std::string_view name);

struct ParseResult {
  std::int64_t id = 0;
  ParseOutcome outcome = ParseOutcome::Exhausted;
  std::optional<Derivation> derivation;
  std::optional<std::vector<std::string>> lexentries;
  double wall_ms = 0.0;
  std::string message;  // diagnostic for the non-parseable outcomes

  bool parseable() const { return outcome == ParseOutcome::Parseable; }
};

/// Throws std::logic_error when the derivation/outcome biconditional or the
/// lexentries length invariant is broken.
void check_invariants(const ParseResult& r, std::size_t token_count);

struct BackendConfig {
  enum class Kind { Toy, External };
  Kind kind = Kind::Toy;
  std::vector<std::string> command;  // external only: argv
  std::int64_t timeout_ms = 60000;
  int workers = 1;
  /// Requests a worker may have outstanding at once (external only).
  int inflight = 1;
  /// Toy only: grammar file; empty means the bundled grammar.
  std::string grammar_path;
};

struct OutcomeSummary {
  std::array<std::int64_t, 4> counts{};  // indexed like kAllOutcomes
  std::int64_t total = 0;

  std::int64_t count(ParseOutcome o) const { return counts[static_cast<std::size_t>(o)]; }
  /// 0 on an empty corpus.
  double fraction(ParseOutcome o) const;
};

OutcomeSummary summarize(const std::vector<ParseResult>& results);

/// Toy backend reply in the external wire format.
nlohmann::json toy_backend_parse(const ToyGrammar& grammar, std::int64_t id, std::string_view text,
                                 std::int64_t timeout_ms);

/// Maps a backend reply to a ParseResult. Malformed replies, and replies whose
/// derivation does not reproduce the request tokens, become ParserError.
ParseResult result_from_reply(std::int64_t id, const nlohmann::json& reply, const Tokens& tokens);

ParseResult parse_sentence(const Tokens& text, const BackendConfig& backend, std::int64_t id = 0);

/// One result per sentence in input order. Throws ConfigError when an
/// external backend cannot be launched.
std::pair<std::vector<ParseResult>, OutcomeSummary> parse_corpus(const std::vector<Tokens>& sentences,
                                                                 const BackendConfig& backend);

/// Derivation corpus records: {"id","outcome","root","tree"} plus
/// "lexentries", and "wall_ms" when include_timing is set.
nlohmann::json to_record(const ParseResult& r, bool include_timing = false);
ParseResult from_record(const nlohmann::json& record);

void write_results(std::ostream& out, const std::vector<ParseResult>& results, bool include_timing = false);
/// Throws DataError naming the source and line on schema violations.
std::vector<ParseResult> read_results(std::istream& in, std::string_view source_name);
std::vector<ParseResult> read_results_file(const std::string& path);

}  // namespace derivscope
