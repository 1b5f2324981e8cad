#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "derivscope/corpus.hpp"
#include "derivscope/discrim.hpp"
#include "derivscope/gateway.hpp"

namespace derivscope {

/// Everything the report reads. Results are matched to examples by id.
struct ReportInputs {
  std::vector<ParallelExample> examples;  // analysis split, outputs and scores attached
  std::vector<ParseResult> reference_results;
  std::vector<ParseResult> nmt_results;
  std::vector<Tokens> train_source;
  std::vector<Tokens> train_reference;
  std::map<std::string, std::string> descriptions;
};

struct ReportOptions {
  std::size_t top_k = 10;                // fig2 rows
  std::int64_t min_ref_count = 1000;     // fig3 threshold
  std::size_t discriminative_rows = 10;  // table3 rows per side
  double train_fraction = 0.8;
  bool exhausted_only = false;
  VectorizeOptions vectorize;
  FitOptions fit;
  std::uint64_t seed = 0;
};

inline constexpr std::array<std::string_view, 6> kReportFiles = {
    "table1_roots.tsv", "table2_correlations.tsv", "table3_discriminative.tsv",
    "fig2_topk.tsv",    "fig3_ratio.tsv",          "summary.txt"};

struct ReportArtifacts {
  std::map<std::string, std::string> files;  // name -> contents
  std::map<std::string, std::int64_t> counts;
};

/// Builds all report artifacts in memory. Throws DataError on an empty
/// analysis set, so callers never write a partial report.
ReportArtifacts emit_report(const ReportInputs& inputs, const ReportOptions& options);

/// Plain-text outcome breakdown: share of all sentences and of unparseable ones.
std::string outcome_summary(const OutcomeSummary& summary);

}  // namespace derivscope
