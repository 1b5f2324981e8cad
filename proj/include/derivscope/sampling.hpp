#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "derivscope/derivation.hpp"
#include "derivscope/gateway.hpp"
#include "derivscope/tokens.hpp"

namespace derivscope {

struct SampledSentence {
  std::int64_t id = 0;
  std::string text;
};

struct UnparseableSample {
  std::vector<SampledSentence> items;  // ascending id
  std::size_t pool_size = 0;
  bool short_pool = false;  // fewer than n qualified
};

/// Uniform sample without replacement of Exhausted outputs with fewer than
/// max_words tokens. outputs are indexed by result id.
UnparseableSample sample_exhaustive_unparseable(const std::vector<ParseResult>& results,
                                                const std::vector<Tokens>& outputs, std::size_t max_words = 10,
                                                std::size_t n = 100, std::uint64_t seed = 0);

struct AnnotationRecord {
  std::int64_t id = 0;
  std::string text;
  std::optional<int> grammatical;  // 1, 0, or unjudged
  int sv_agreement_error = 0;
  int np_agreement_error = 0;
  int excluded = 0;
  std::string exclusion_reason;
};

/// Header: id text grammatical sv_agreement_error np_agreement_error excluded exclusion_reason.
/// Judgment columns are written blank for unjudged records.
void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records);
std::vector<AnnotationRecord> read_annotations(std::istream& in, std::string_view source_name);

std::vector<AnnotationRecord> annotation_template(const UnparseableSample& sample);

struct GrammaticalitySummary {
  std::size_t total = 0;
  std::size_t grammatical = 0;
  std::size_t ungrammatical = 0;
  std::size_t excluded = 0;
  std::size_t sv_only = 0;
  std::size_t np_only = 0;
  std::size_t both = 0;
  std::size_t fixable = 0;  // ungrammatical with any agreement flag, counted once

  /// grammatical / (total - excluded); nullopt when nothing is included.
  std::optional<double> grammatical_share() const;
  /// fixable / ungrammatical; nullopt for 0/0.
  std::optional<double> fixable_share() const;
};

/// Throws DataError naming the id of a non-excluded record without a judgment,
/// or an excluded record that carries one.
GrammaticalitySummary summarize_grammaticality(const std::vector<AnnotationRecord>& records);

void write_grammaticality_summary(std::ostream& out, const GrammaticalitySummary& s);

struct ContrastPair {
  std::int64_t id = 0;
  Tokens source;
  Tokens reference;
  Tokens output;
  Derivation reference_derivation;
  std::optional<Derivation> output_derivation;  // present iff the output parsed
};

struct ContrastSample {
  std::int64_t id = 0;
  std::string source, reference, output;
};

/// Rule labels appearing anywhere in the pairs' derivations.
std::set<std::string> rule_inventory(const std::vector<ContrastPair>& pairs, const RuleBagOptions& options = {});

/// Pairs whose reference uses the rule, whose parsed output does not, and
/// whose reference has fewer than max_len tokens. Throws DataError for a rule
/// outside the inventory.
std::vector<ContrastSample> sample_rule_contrast(const std::string& rule, const std::vector<ContrastPair>& pairs,
                                                 std::size_t max_len = 12, std::size_t n = 20,
                                                 std::uint64_t seed = 0, const RuleBagOptions& options = {});

void write_contrast_samples(std::ostream& out, const std::vector<ContrastSample>& samples);

}  // namespace derivscope
