#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "derivscope/derivation.hpp"

namespace derivscope {

using RuleCounts = std::map<std::string, std::int64_t>;

RuleCounts count_rules(const std::vector<Derivation>& derivations, const RuleBagOptions& options = {});

/// Descending by count, ties by label; at most k entries.
std::vector<std::pair<std::string, std::int64_t>> top_k(const RuleCounts& counts, std::size_t k);

struct RuleRow {
  std::string rule;
  std::int64_t count_ref = 0;
  std::int64_t count_nmt = 0;
  std::optional<std::size_t> rank_ref;  // present iff count_ref > 0
  std::optional<double> ratio;          // count_nmt / count_ref, present iff count_ref > 0
};

class RuleTable {
 public:
  static RuleTable build(const RuleCounts& reference, const RuleCounts& nmt);

  /// Rows ordered by reference rank, then NMT-only rules by label.
  const std::vector<RuleRow>& rows() const { return rows_; }
  const RuleRow* find(const std::string& rule) const;

 private:
  std::vector<RuleRow> rows_;
};

struct RatioPoint {
  std::size_t rank_ref = 0;
  std::string rule;
  double ratio = 0.0;
};

/// Rules used strictly more than min_ref_count times in the reference set,
/// ordered by reference rank. Rules absent from the NMT set have ratio 0.
std::vector<RatioPoint> ratio_table(const RuleTable& table, std::int64_t min_ref_count = 1000);

struct BucketDispersion {
  std::size_t first_rank = 0;
  std::size_t last_rank = 0;
  std::size_t size = 0;
  std::optional<double> variance;  // sample variance; absent for buckets of fewer than 2 rules
};

/// Consecutive buckets of bucket_size ratio points in rank order. Throws
/// ConfigError when bucket_size < 2.
std::vector<BucketDispersion> ratio_dispersion(const std::vector<RatioPoint>& points, std::size_t bucket_size);

/// rule<TAB>count_ref<TAB>count_nmt, with header.
void write_rule_counts(std::ostream& out, const RuleTable& table);
RuleTable read_rule_counts(std::istream& in, std::string_view source_name);

/// The k most frequent reference rules with both counts.
void write_topk(std::ostream& out, const RuleTable& table, std::size_t k);

/// rank<TAB>rule<TAB>ratio, with header.
void write_ratio_points(std::ostream& out, const std::vector<RatioPoint>& points);

void write_dispersion(std::ostream& out, const std::vector<BucketDispersion>& buckets);

}  // namespace derivscope
