#include "derivscope/rule_analysis.hpp"

#include <algorithm>

#include <Eigen/Core>
#include <fmt/format.h>

#include "derivscope/errors.hpp"
#include "derivscope/tsv.hpp"

namespace derivscope {

RuleCounts count_rules(const std::vector<Derivation>& derivations, const RuleBagOptions& options) {
  RuleCounts counts;
  for (const auto& d : derivations) {
    for (const auto& [rule, c] : bag_of_rules(d, options)) counts[rule] += c;
  }
  return counts;
}

std::vector<std::pair<std::string, std::int64_t>> top_k(const RuleCounts& counts, std::size_t k) {
  std::vector<std::pair<std::string, std::int64_t>> items(counts.begin(), counts.end());
  // counts is label-ordered, so a stable sort on count keeps ties lexicographic
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (items.size() > k) items.resize(k);
  return items;
}

RuleTable RuleTable::build(const RuleCounts& reference, const RuleCounts& nmt) {
  RuleTable t;
  std::size_t rank = 0;
  for (const auto& [rule, c] : top_k(reference, reference.size())) {
    if (c <= 0) continue;
    RuleRow row;
    row.rule = rule;
    row.count_ref = c;
    auto it = nmt.find(rule);
    row.count_nmt = it == nmt.end() ? 0 : it->second;
    row.rank_ref = ++rank;
    row.ratio = static_cast<double>(row.count_nmt) / static_cast<double>(row.count_ref);
    t.rows_.push_back(std::move(row));
  }
  for (const auto& [rule, c] : nmt) {
    auto it = reference.find(rule);
    if (it != reference.end() && it->second > 0) continue;
    RuleRow row;
    row.rule = rule;
    row.count_nmt = c;
    t.rows_.push_back(std::move(row));
  }
  return t;
}

const RuleRow* RuleTable::find(const std::string& rule) const {
  for (const auto& r : rows_) {
    if (r.rule == rule) return &r;
  }
  return nullptr;
}

std::vector<RatioPoint> ratio_table(const RuleTable& table, std::int64_t min_ref_count) {
  std::vector<RatioPoint> out;
  for (const auto& r : table.rows()) {
    if (!r.rank_ref || r.count_ref <= min_ref_count) continue;
    out.push_back({*r.rank_ref, r.rule, *r.ratio});
  }
  return out;
}

std::vector<BucketDispersion> ratio_dispersion(const std::vector<RatioPoint>& points, std::size_t bucket_size) {
  if (bucket_size < 2) throw ConfigError("bucket size must be at least 2");
  std::vector<BucketDispersion> out;
  for (std::size_t start = 0; start < points.size(); start += bucket_size) {
    const std::size_t end = std::min(points.size(), start + bucket_size);
    BucketDispersion b;
    b.first_rank = points[start].rank_ref;
    b.last_rank = points[end - 1].rank_ref;
    b.size = end - start;
    if (b.size >= 2) {
      Eigen::ArrayXd ratios(static_cast<Eigen::Index>(b.size));
      for (std::size_t i = start; i < end; ++i) ratios(static_cast<Eigen::Index>(i - start)) = points[i].ratio;
      b.variance = (ratios - ratios.mean()).square().sum() / static_cast<double>(b.size - 1);
    }
    out.push_back(b);
  }
  return out;
}

void write_rule_counts(std::ostream& out, const RuleTable& table) {
  out << "rule\tcount_ref\tcount_nmt\n";
  for (const auto& r : table.rows()) out << r.rule << '\t' << r.count_ref << '\t' << r.count_nmt << '\n';
}

RuleTable read_rule_counts(std::istream& in, std::string_view source_name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty rule counts file", source_name));
  tsv::expect_header(line, "rule\tcount_ref\tcount_nmt", source_name);
  RuleCounts ref, nmt;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = tsv::split(line);
    std::int64_t cr = 0, cn = 0;
    if (c.size() != 3 || c[0].empty() || !tsv::parse_int(c[1], cr) || !tsv::parse_int(c[2], cn) || cr < 0 ||
        cn < 0) {
      throw DataError(fmt::format("{}:{}: expected rule<TAB>count_ref<TAB>count_nmt", source_name, lineno));
    }
    if (cr > 0) ref[c[0]] = cr;
    if (cn > 0) nmt[c[0]] = cn;
  }
  return RuleTable::build(ref, nmt);
}

void write_topk(std::ostream& out, const RuleTable& table, std::size_t k) {
  out << "rule\tcount_ref\tcount_nmt\n";
  std::size_t n = 0;
  for (const auto& r : table.rows()) {
    if (!r.rank_ref || n++ >= k) break;
    out << r.rule << '\t' << r.count_ref << '\t' << r.count_nmt << '\n';
  }
}

void write_ratio_points(std::ostream& out, const std::vector<RatioPoint>& points) {
  out << "rank\trule\tratio\n";
  for (const auto& p : points) out << p.rank_ref << '\t' << p.rule << '\t' << tsv::format_double(p.ratio) << '\n';
}

void write_dispersion(std::ostream& out, const std::vector<BucketDispersion>& buckets) {
  out << "first_rank\tlast_rank\tsize\tvariance\n";
  for (const auto& b : buckets) {
    out << b.first_rank << '\t' << b.last_rank << '\t' << b.size << '\t'
        << (b.variance ? tsv::format_double(*b.variance) : std::string("absent")) << '\n';
  }
}

}  // namespace derivscope
