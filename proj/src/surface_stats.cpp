#include "derivscope/surface_stats.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include <fmt/format.h>

#include "derivscope/tsv.hpp"

namespace derivscope {

UnigramModel UnigramModel::train(const std::vector<Tokens>& corpus) {
  std::unordered_map<std::string, std::int64_t> counts;
  std::int64_t total = 0;
  for (const auto& s : corpus) {
    for (const auto& t : s) {
      ++counts[t];
      ++total;
    }
  }
  if (total == 0) throw ConfigError("unigram model needs a non-empty training corpus");
  UnigramModel m;
  m.total_ = total;
  for (const auto& [tok, c] : counts) m.prob_[tok] = static_cast<double>(c) / static_cast<double>(total);
  m.oov_floor_ = 1.0 / static_cast<double>(total + static_cast<std::int64_t>(counts.size()));
  return m;
}

double UnigramModel::probability(std::string_view token) const {
  auto it = prob_.find(std::string(token));
  return it == prob_.end() ? oov_floor_ : it->second;
}

double UnigramModel::log_prob(const Tokens& sentence) const {
  double lp = 0.0;
  for (const auto& t : sentence) lp += std::log(probability(t));
  return lp;
}

double feature_value(const FeatureRow& row, std::size_t feature) {
  switch (feature) {
    case 0:
      return row.lp_nmt;
    case 1:
      return row.lp_uni_src;
    case 2:
      return row.lp_uni_ref;
    case 3:
      return row.lp_uni_out;
    case 4:
      return static_cast<double>(row.len_out);
    case 5:
      return row.mean_lp;
    case 6:
      return row.norm_lp;
  }
  throw std::out_of_range("feature index");
}

namespace {

bool round_trips(double lp, double divisor) {
  if (divisor == 0.0) return true;
  return (lp / divisor) * divisor == lp;
}

}  // namespace

double snap_log_prob(double lp_nmt, std::int64_t len_out, double lp_uni_out) {
  const double len = static_cast<double>(len_out);
  auto ok = [&](double v) { return round_trips(v, len) && round_trips(v, lp_uni_out); };
  if (ok(lp_nmt)) return lp_nmt;
  double up = lp_nmt;
  double down = lp_nmt;
  for (int step = 0; step < 4096; ++step) {
    up = std::nextafter(up, 0.0);
    down = std::nextafter(down, -std::numeric_limits<double>::infinity());
    if (up <= 0.0 && ok(up)) return up;
    if (ok(down)) return down;
  }
  return lp_nmt;
}

FeatureRow feature_row(const ParallelExample& example, const ParseResult& result, const UnigramModel& source_model,
                       const UnigramModel& target_model, const FeatureOptions& options) {
  if (!example.output || !example.model_lp) {
    throw UndefinedStatistic(fmt::format("example {}: output or model score missing", example.id));
  }
  if (example.output->empty()) throw UndefinedStatistic(fmt::format("example {}: zero-length output", example.id));
  FeatureRow row;
  row.id = example.id;
  row.lp_uni_src = source_model.log_prob(example.source);
  row.lp_uni_ref = target_model.log_prob(example.reference);
  row.lp_uni_out = target_model.log_prob(*example.output);
  row.len_out = static_cast<std::int64_t>(example.output->size());
  if (row.lp_uni_out == 0.0 && !options.allow_undefined_norm) {
    throw UndefinedStatistic(fmt::format("example {}: norm_lp undefined, unigram log probability is 0", example.id));
  }
  row.lp_nmt = snap_log_prob(*example.model_lp, row.len_out, row.lp_uni_out);
  row.mean_lp = row.lp_nmt / static_cast<double>(row.len_out);
  row.norm_lp = row.lp_uni_out == 0.0 ? std::nan("") : -row.lp_nmt / row.lp_uni_out;
  row.parseable = result.parseable() ? 1 : 0;
  return row;
}

FeatureTable compute_features(const std::vector<ParallelExample>& examples, const std::vector<ParseResult>& results,
                              const UnigramModel& source_model, const UnigramModel& target_model,
                              const FeatureTableOptions& options) {
  std::unordered_map<std::int64_t, const ParseResult*> by_id;
  for (const auto& r : results) by_id[r.id] = &r;
  FeatureTable table;
  FeatureOptions row_opts;
  row_opts.allow_undefined_norm = true;
  for (const auto& ex : examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) throw DataError(fmt::format("no parse result for output {}", ex.id));
    const ParseResult& r = *it->second;
    if (options.exhausted_only && !r.parseable() && r.outcome != ParseOutcome::Exhausted) {
      ++table.excluded_outcome;
      continue;
    }
    if (!ex.output || !ex.model_lp) {
      ++table.excluded_missing;
      continue;
    }
    if (ex.output->empty()) {
      ++table.excluded_empty;
      continue;
    }
    table.rows.push_back(feature_row(ex, r, source_model, target_model, row_opts));
  }
  return table;
}

namespace {
constexpr std::string_view kFeaturesHeader =
    "id\tlp_nmt\tlp_uni_src\tlp_uni_ref\tlp_uni_out\tlen_out\tmean_lp\tnorm_lp\tparseable";
}

void write_features(std::ostream& out, const std::vector<FeatureRow>& rows) {
  out << kFeaturesHeader << '\n';
  for (const auto& r : rows) {
    out << r.id << '\t' << tsv::format_double(r.lp_nmt) << '\t' << tsv::format_double(r.lp_uni_src) << '\t'
        << tsv::format_double(r.lp_uni_ref) << '\t' << tsv::format_double(r.lp_uni_out) << '\t' << r.len_out << '\t'
        << tsv::format_double(r.mean_lp) << '\t' << tsv::format_double(r.norm_lp) << '\t' << r.parseable << '\n';
  }
}

std::vector<FeatureRow> read_features(std::istream& in, std::string_view source_name) {
  std::vector<FeatureRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty features file", source_name));
  tsv::expect_header(line, kFeaturesHeader, source_name);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = tsv::split(line);
    FeatureRow r;
    std::int64_t parseable = 0;
    const bool ok = c.size() == 9 && tsv::parse_int(c[0], r.id) && tsv::parse_double(c[1], r.lp_nmt) &&
                    tsv::parse_double(c[2], r.lp_uni_src) && tsv::parse_double(c[3], r.lp_uni_ref) &&
                    tsv::parse_double(c[4], r.lp_uni_out) && tsv::parse_int(c[5], r.len_out) &&
                    tsv::parse_double(c[6], r.mean_lp) && tsv::parse_double(c[7], r.norm_lp) &&
                    tsv::parse_int(c[8], parseable) && (parseable == 0 || parseable == 1);
    if (!ok) throw DataError(fmt::format("{}:{}: malformed feature row", source_name, lineno));
    r.parseable = static_cast<int>(parseable);
    rows.push_back(r);
  }
  return rows;
}

std::vector<CorrelationEntry> correlation_report(const std::vector<FeatureRow>& rows) {
  std::size_t positives = 0;
  for (const auto& r : rows) positives += r.parseable == 1;
  if (rows.size() < 2 || positives == 0 || positives == rows.size()) {
    throw UndefinedStatistic("correlation report needs both parseable and unparseable rows");
  }
  std::vector<CorrelationEntry> report;
  for (std::size_t f = 0; f < kFeatureNames.size(); ++f) {
    std::vector<double> x, y;
    x.reserve(rows.size());
    y.reserve(rows.size());
    for (const auto& r : rows) {
      const double v = feature_value(r, f);
      if (!std::isfinite(v)) continue;
      x.push_back(v);
      y.push_back(static_cast<double>(r.parseable));
    }
    CorrelationEntry e{std::string(kFeatureNames[f]), std::nan(""), x.size(), rows.size() - x.size()};
    try {
      e.r = pearson(x, y);
    } catch (const UndefinedStatistic&) {
    }
    report.push_back(std::move(e));
  }
  return report;
}

void write_correlations(std::ostream& out, const std::vector<CorrelationEntry>& report) {
  out << "feature\tr\tn_used\tn_excluded\n";
  for (const auto& e : report) {
    out << e.feature << '\t' << tsv::format_fixed(e.r, 6) << '\t' << e.n_used << '\t' << e.n_excluded << '\n';
  }
}

namespace {

std::array<double, 5> percentages(const std::array<std::int64_t, 5>& counts) {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  std::array<double, 5> out{};
  if (total == 0) return out;
  for (std::size_t i = 0; i < 5; ++i) out[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(total);
  return out;
}

std::array<std::int64_t, 5> root_counts(const std::vector<ParseResult>& results) {
  std::array<std::int64_t, 5> counts{};
  for (const auto& r : results) {
    if (r.derivation) {
      ++counts[column_index(r.derivation->root)];
    } else {
      ++counts[4];
    }
  }
  return counts;
}

RootDistribution finish_distribution(const std::array<std::int64_t, 5>& ref, const std::array<std::int64_t, 5>& nmt) {
  RootDistribution d;
  d.ref_counts = ref;
  d.nmt_counts = nmt;
  d.ref = percentages(ref);
  d.nmt = percentages(nmt);
  for (std::size_t i = 0; i < 5; ++i) d.delta[i] = d.nmt[i] - d.ref[i];
  return d;
}

}  // namespace

std::array<double, 5> root_row(const std::vector<ParseResult>& results) {
  if (results.empty()) throw DataError("root distribution of an empty result set");
  return percentages(root_counts(results));
}

RootDistribution root_distribution(const std::vector<Derivation>& reference,
                                   const std::vector<ParseResult>& nmt_results) {
  if (reference.empty() || nmt_results.empty()) throw DataError("root distribution needs non-empty inputs");
  std::array<std::int64_t, 5> ref{};
  for (const auto& d : reference) ++ref[column_index(d.root)];
  return finish_distribution(ref, root_counts(nmt_results));
}

RootDistribution root_distribution(const std::vector<ParseResult>& reference_results,
                                   const std::vector<ParseResult>& nmt_results) {
  if (reference_results.empty() || nmt_results.empty()) throw DataError("root distribution needs non-empty inputs");
  return finish_distribution(root_counts(reference_results), root_counts(nmt_results));
}

void write_root_distribution(std::ostream& out, const RootDistribution& d) {
  out << "source\tstrict_full\tstrict_frag\tinformal_full\tinformal_frag\tunparseable\n";
  auto row = [&out](std::string_view name, const std::array<double, 5>& v, bool signed_values) {
    out << name;
    for (double x : v) {
      const std::string s = tsv::format_fixed(x, 1);
      out << '\t' << (signed_values && x >= 0.0 && s != "0.0" ? "+" : "") << (s == "-0.0" ? "0.0" : s);
    }
    out << '\n';
  };
  row("ref", d.ref, false);
  row("nmt", d.nmt, false);
  row("delta", d.delta, true);
}

}  // namespace derivscope
