#include "derivscope/report.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "derivscope/errors.hpp"
#include "derivscope/rule_analysis.hpp"
#include "derivscope/surface_stats.hpp"
#include "derivscope/tsv.hpp"

namespace derivscope {

namespace {

std::vector<Derivation> parsed_derivations(const std::vector<ParseResult>& results) {
  std::vector<Derivation> out;
  for (const auto& r : results) {
    if (r.derivation) out.push_back(*r.derivation);
  }
  return out;
}

std::vector<ParseResult> by_example(const std::vector<ParallelExample>& examples,
                                    const std::vector<ParseResult>& results, std::string_view what) {
  std::map<std::int64_t, const ParseResult*> index;
  for (const auto& r : results) index[r.id] = &r;
  std::vector<ParseResult> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    auto it = index.find(e.id);
    if (it == index.end()) throw DataError(fmt::format("{} results have no record for example {}", what, e.id));
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace

std::string outcome_summary(const OutcomeSummary& s) {
  std::ostringstream out;
  const auto unparseable = s.total - s.count(ParseOutcome::Parseable);
  out << fmt::format("sentences parsed: {}\n", s.total);
  for (auto o : kAllOutcomes) {
    const auto n = s.count(o);
    out << fmt::format("{}: {} ({}% of all", to_string(o), n, tsv::format_fixed(100.0 * s.fraction(o), 1));
    if (o != ParseOutcome::Parseable) {
      out << (unparseable > 0 ? fmt::format(", {}% of unparseable",
                                            tsv::format_fixed(100.0 * static_cast<double>(n) /
                                                                  static_cast<double>(unparseable),
                                                              1))
                              : std::string(", n/a of unparseable"));
    }
    out << ")\n";
  }
  return out.str();
}

ReportArtifacts emit_report(const ReportInputs& in, const ReportOptions& opt) {
  if (in.examples.empty()) throw DataError("empty analysis set: nothing to report");
  ReportArtifacts art;
  const auto ref_results = by_example(in.examples, in.reference_results, "reference");
  const auto nmt_results = by_example(in.examples, in.nmt_results, "NMT");
  const auto ref_derivs = parsed_derivations(ref_results);
  const auto nmt_derivs = parsed_derivations(nmt_results);
  if (ref_derivs.empty()) throw DataError("no parseable reference derivations in the analysis set");
  if (nmt_derivs.empty()) throw DataError("no parseable NMT derivations in the analysis set");

  {
    std::ostringstream t;
    write_root_distribution(t, root_distribution(ref_results, nmt_results));
    art.files["table1_roots.tsv"] = t.str();
  }

  const auto src_model = UnigramModel::train(in.train_source);
  const auto ref_model = UnigramModel::train(in.train_reference);
  const auto features =
      compute_features(in.examples, nmt_results, src_model, ref_model, {.exhausted_only = opt.exhausted_only});
  {
    std::ostringstream t;
    write_correlations(t, correlation_report(features.rows));
    art.files["table2_correlations.tsv"] = t.str();
  }

  const auto table = RuleTable::build(count_rules(ref_derivs, opt.vectorize.bag),
                                      count_rules(nmt_derivs, opt.vectorize.bag));
  {
    std::ostringstream t;
    write_topk(t, table, opt.top_k);
    art.files["fig2_topk.tsv"] = t.str();
  }
  const auto points = ratio_table(table, opt.min_ref_count);
  {
    std::ostringstream t;
    write_ratio_points(t, points);
    art.files["fig3_ratio.tsv"] = t.str();
  }

  const auto data = vectorize(ref_derivs, nmt_derivs, opt.vectorize);
  const auto [train, val] = split_train_val(data, opt.train_fraction, opt.seed);
  const auto model = fit(train, opt.fit);
  const auto eval = evaluate(model, val);
  {
    const auto [pos, neg] = discriminative_rules(model, opt.discriminative_rows);
    std::ostringstream t;
    write_discriminative_table(t, pos, neg, in.descriptions);
    art.files["table3_discriminative.tsv"] = t.str();
  }

  const auto nmt_summary = summarize(nmt_results);
  std::ostringstream s;
  s << "NMT output parseability\n" << outcome_summary(nmt_summary) << '\n';
  s << fmt::format("reference derivations: {}\n", ref_derivs.size());
  s << fmt::format("NMT derivations: {}\n", nmt_derivs.size());
  s << fmt::format("feature rows: {} (excluded: {} missing, {} empty, {} by outcome)\n", features.rows.size(),
                   features.excluded_missing, features.excluded_empty, features.excluded_outcome);
  s << fmt::format("rules: {} in reference, {} above the ratio threshold of {}\n",
                   std::count_if(table.rows().begin(), table.rows().end(),
                                 [](const RuleRow& r) { return r.count_ref > 0; }),
                   points.size(), opt.min_ref_count);
  s << fmt::format("classifier: {} features, {} nonzero, {} iterations, converged {}\n", model.features.size(),
                   model.nonzeros(), model.iterations, model.converged ? "yes" : "no");
  s << fmt::format("validation accuracy: {}% on {} rows (majority baseline {}%)\n",
                   tsv::format_fixed(100.0 * eval.accuracy, 1), eval.n, tsv::format_fixed(100.0 * eval.baseline, 1));
  art.files["summary.txt"] = s.str();

  art.counts = {{"examples", static_cast<std::int64_t>(in.examples.size())},
                {"reference_derivations", static_cast<std::int64_t>(ref_derivs.size())},
                {"nmt_derivations", static_cast<std::int64_t>(nmt_derivs.size())},
                {"feature_rows", static_cast<std::int64_t>(features.rows.size())},
                {"ratio_points", static_cast<std::int64_t>(points.size())},
                {"validation_rows", static_cast<std::int64_t>(eval.n)}};
  return art;
}

}  // namespace derivscope
