#include "derivscope/sampling.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "derivscope/errors.hpp"
#include "derivscope/random.hpp"
#include "derivscope/tsv.hpp"

namespace derivscope {

UnparseableSample sample_exhaustive_unparseable(const std::vector<ParseResult>& results,
                                                const std::vector<Tokens>& outputs, std::size_t max_words,
                                                std::size_t n, std::uint64_t seed) {
  std::vector<const ParseResult*> pool;
  for (const auto& r : results) {
    if (r.outcome != ParseOutcome::Exhausted) continue;
    if (r.id < 0 || static_cast<std::size_t>(r.id) >= outputs.size()) {
      throw DataError(fmt::format("result {} has no output sentence", r.id));
    }
    if (outputs[static_cast<std::size_t>(r.id)].size() < max_words) pool.push_back(&r);
  }
  std::sort(pool.begin(), pool.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  UnparseableSample s;
  s.pool_size = pool.size();
  s.short_pool = pool.size() < n;
  for (auto i : seeded_sample(pool.size(), n, seed)) {
    const auto id = pool[i]->id;
    s.items.push_back({id, join_tokens(outputs[static_cast<std::size_t>(id)])});
  }
  std::sort(s.items.begin(), s.items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return s;
}

namespace {
constexpr std::string_view kAnnotationHeader =
    "id\ttext\tgrammatical\tsv_agreement_error\tnp_agreement_error\texcluded\texclusion_reason";

bool parse_flag(const std::string& s, int& out, bool allow_blank) {
  if (s.empty()) {
    out = 0;
    return allow_blank;
  }
  if (s == "0" || s == "1") {
    out = s[0] - '0';
    return true;
  }
  return false;
}
}  // namespace

void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  out << kAnnotationHeader << '\n';
  for (const auto& r : records) {
    const bool judged = r.grammatical.has_value();
    out << r.id << '\t' << r.text << '\t' << (judged ? std::to_string(*r.grammatical) : "") << '\t'
        << (judged || r.sv_agreement_error ? std::to_string(r.sv_agreement_error) : "") << '\t'
        << (judged || r.np_agreement_error ? std::to_string(r.np_agreement_error) : "") << '\t'
        << (judged || r.excluded ? std::to_string(r.excluded) : "") << '\t' << r.exclusion_reason << '\n';
  }
}

std::vector<AnnotationRecord> read_annotations(std::istream& in, std::string_view source_name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty annotation file", source_name));
  tsv::expect_header(line, kAnnotationHeader, source_name);
  std::vector<AnnotationRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto c = tsv::split(line);
    if (c.size() == 6) c.emplace_back();  // trailing empty reason
    AnnotationRecord r;
    int g = 0;
    bool ok = c.size() == 7 && tsv::parse_int(c[0], r.id) && parse_flag(c[2], g, true) &&
              parse_flag(c[3], r.sv_agreement_error, true) && parse_flag(c[4], r.np_agreement_error, true) &&
              parse_flag(c[5], r.excluded, true);
    if (!ok) throw DataError(fmt::format("{}:{}: malformed annotation record", source_name, lineno));
    r.text = c[1];
    if (!c[2].empty()) r.grammatical = g;
    r.exclusion_reason = c[6];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AnnotationRecord> annotation_template(const UnparseableSample& sample) {
  std::vector<AnnotationRecord> out;
  for (const auto& item : sample.items) {
    AnnotationRecord r;
    r.id = item.id;
    r.text = item.text;
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<double> GrammaticalitySummary::grammatical_share() const {
  const auto included = total - excluded;
  if (included == 0) return std::nullopt;
  return static_cast<double>(grammatical) / static_cast<double>(included);
}

std::optional<double> GrammaticalitySummary::fixable_share() const {
  if (ungrammatical == 0) return std::nullopt;
  return static_cast<double>(fixable) / static_cast<double>(ungrammatical);
}

GrammaticalitySummary summarize_grammaticality(const std::vector<AnnotationRecord>& records) {
  GrammaticalitySummary s;
  for (const auto& r : records) {
    ++s.total;
    if (r.excluded) {
      if (r.grammatical) throw DataError(fmt::format("record {} is excluded but carries a judgment", r.id));
      ++s.excluded;
      continue;
    }
    if (!r.grammatical) throw DataError(fmt::format("incomplete annotation: record {} has no judgment", r.id));
    if (*r.grammatical == 1) {
      ++s.grammatical;
      continue;
    }
    ++s.ungrammatical;
    const bool sv = r.sv_agreement_error != 0;
    const bool np = r.np_agreement_error != 0;
    if (sv && np) {
      ++s.both;
    } else if (sv) {
      ++s.sv_only;
    } else if (np) {
      ++s.np_only;
    }
    if (sv || np) ++s.fixable;
  }
  return s;
}

void write_grammaticality_summary(std::ostream& out, const GrammaticalitySummary& s) {
  auto share = [](std::optional<double> v, std::size_t num, std::size_t den) {
    return v ? tsv::format_fixed(100.0 * *v, 1) : fmt::format("{}/{}", num, den);
  };
  out << "statistic\tvalue\n";
  out << "total\t" << s.total << '\n';
  out << "grammatical\t" << s.grammatical << '\n';
  out << "ungrammatical\t" << s.ungrammatical << '\n';
  out << "excluded\t" << s.excluded << '\n';
  out << "sv_agreement_only\t" << s.sv_only << '\n';
  out << "np_agreement_only\t" << s.np_only << '\n';
  out << "both_agreement\t" << s.both << '\n';
  out << "fixable\t" << s.fixable << '\n';
  out << "grammatical_share_pct\t" << share(s.grammatical_share(), s.grammatical, s.total - s.excluded) << '\n';
  out << "fixable_share_pct\t" << share(s.fixable_share(), s.fixable, s.ungrammatical) << '\n';
}

std::set<std::string> rule_inventory(const std::vector<ContrastPair>& pairs, const RuleBagOptions& options) {
  std::set<std::string> rules;
  for (const auto& p : pairs) {
    for (const auto& [rule, _] : bag_of_rules(p.reference_derivation, options)) rules.insert(rule);
    if (p.output_derivation) {
      for (const auto& [rule, _] : bag_of_rules(*p.output_derivation, options)) rules.insert(rule);
    }
  }
  return rules;
}

std::vector<ContrastSample> sample_rule_contrast(const std::string& rule, const std::vector<ContrastPair>& pairs,
                                                 std::size_t max_len, std::size_t n, std::uint64_t seed,
                                                 const RuleBagOptions& options) {
  if (!rule_inventory(pairs, options).count(rule)) {
    throw DataError(fmt::format("rule '{}' does not occur in the rule inventory", rule));
  }
  std::vector<const ContrastPair*> pool;
  for (const auto& p : pairs) {
    if (!p.output_derivation || p.reference.size() >= max_len) continue;
    if (!bag_of_rules(p.reference_derivation, options).count(rule)) continue;
    if (bag_of_rules(*p.output_derivation, options).count(rule)) continue;
    pool.push_back(&p);
  }
  std::vector<ContrastSample> out;
  for (auto i : seeded_sample(pool.size(), n, seed)) {
    const auto& p = *pool[i];
    out.push_back({p.id, join_tokens(p.source), join_tokens(p.reference), join_tokens(p.output)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

void write_contrast_samples(std::ostream& out, const std::vector<ContrastSample>& samples) {
  out << "id\tsource\treference\toutput\n";
  for (const auto& s : samples) out << s.id << '\t' << s.source << '\t' << s.reference << '\t' << s.output << '\n';
}

}  // namespace derivscope
