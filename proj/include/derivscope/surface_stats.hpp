#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "derivscope/corpus.hpp"
#include "derivscope/errors.hpp"
#include "derivscope/gateway.hpp"

namespace derivscope {

/// Product-moment correlation. With a binary y this is the point-biserial
/// coefficient. Centered two-pass sums, clamped to [-1, 1].
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  static_assert(std::is_same_v<Scalar, typename DerivedY::Scalar>, "pearson: mixed scalar types");
  if (x.size() != y.size()) throw UndefinedStatistic("pearson: arguments differ in length");
  if (x.size() < 2) throw UndefinedStatistic("pearson: need at least two observations");
  const auto n = static_cast<Scalar>(x.size());
  const auto xc = (x.array() - x.sum() / n).eval();
  const auto yc = (y.array() - y.sum() / n).eval();
  const Scalar sxx = xc.square().sum();
  const Scalar syy = yc.square().sum();
  if (!(sxx > Scalar(0)) || !(syy > Scalar(0))) throw UndefinedStatistic("pearson: zero variance");
  const Scalar r = (xc * yc).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return pearson(Map(x.data(), static_cast<Eigen::Index>(x.size())),
                 Map(y.data(), static_cast<Eigen::Index>(y.size())));
}

class UnigramModel {
 public:
  /// Maximum-likelihood unigram; unseen tokens get 1/(N + V).
  static UnigramModel train(const std::vector<Tokens>& corpus);

  double probability(std::string_view token) const;
  double log_prob(const Tokens& sentence) const;  // natural log
  double oov_floor() const { return oov_floor_; }
  std::size_t vocabulary_size() const { return prob_.size(); }
  std::int64_t token_count() const { return total_; }

 private:
  std::unordered_map<std::string, double> prob_;
  double oov_floor_ = 0.0;
  std::int64_t total_ = 0;
};

inline UnigramModel train_unigram(const std::vector<Tokens>& corpus) { return UnigramModel::train(corpus); }

struct FeatureRow {
  std::int64_t id = 0;
  double lp_nmt = 0.0;
  double lp_uni_src = 0.0;
  double lp_uni_ref = 0.0;
  double lp_uni_out = 0.0;
  std::int64_t len_out = 0;
  double mean_lp = 0.0;  // lp_nmt / len_out
  double norm_lp = 0.0;  // -lp_nmt / lp_uni_out; NaN when lp_uni_out == 0
  int parseable = 0;
};

inline constexpr std::array<std::string_view, 7> kFeatureNames = {
    "lp_nmt", "lp_uni_src", "lp_uni_ref", "lp_uni_out", "len_out", "mean_lp", "norm_lp"};

double feature_value(const FeatureRow& row, std::size_t feature);

/// The double nearest to lp_nmt (searching outward by ulps) for which
/// lp/len*len and lp/lp_uni_out*lp_uni_out both round back to lp. Keeps the
/// stored row's defining identities exact in floating point; the adjustment
/// is a few ulps at most.
double snap_log_prob(double lp_nmt, std::int64_t len_out, double lp_uni_out);

struct FeatureOptions {
  /// Keep rows whose norm_lp is undefined, with norm_lp = NaN.
  bool allow_undefined_norm = false;
};

/// Throws UndefinedStatistic when the output is empty, the score or output is
/// missing, or (unless allowed) lp_uni_out is 0.
FeatureRow feature_row(const ParallelExample& example, const ParseResult& result, const UnigramModel& source_model,
                       const UnigramModel& target_model, const FeatureOptions& options = {});

struct FeatureTable {
  std::vector<FeatureRow> rows;
  std::size_t excluded_missing = 0;   // no output or no score
  std::size_t excluded_empty = 0;     // zero-length output
  std::size_t excluded_outcome = 0;   // dropped by exhausted_only
};

struct FeatureTableOptions {
  /// Negative class only from Exhausted; other failures are dropped.
  bool exhausted_only = false;
};

/// results are matched to examples by id.
FeatureTable compute_features(const std::vector<ParallelExample>& examples, const std::vector<ParseResult>& results,
                              const UnigramModel& source_model, const UnigramModel& target_model,
                              const FeatureTableOptions& options = {});

void write_features(std::ostream& out, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features(std::istream& in, std::string_view source_name);

struct CorrelationEntry {
  std::string feature;
  double r = 0.0;  // NaN when the feature has zero variance
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

/// One entry per feature in table order. Non-finite feature values are
/// excluded per feature. Throws UndefinedStatistic on single-class input.
std::vector<CorrelationEntry> correlation_report(const std::vector<FeatureRow>& rows);

void write_correlations(std::ostream& out, const std::vector<CorrelationEntry>& report);

/// Percentages per row: strict full, strict frag, informal full, informal
/// frag, unparseable.
struct RootDistribution {
  std::array<std::int64_t, 5> ref_counts{};
  std::array<std::int64_t, 5> nmt_counts{};
  std::array<double, 5> ref{};
  std::array<double, 5> nmt{};
  std::array<double, 5> delta{};
};

std::array<double, 5> root_row(const std::vector<ParseResult>& results);

RootDistribution root_distribution(const std::vector<Derivation>& reference,
                                   const std::vector<ParseResult>& nmt_results);
RootDistribution root_distribution(const std::vector<ParseResult>& reference_results,
                                   const std::vector<ParseResult>& nmt_results);

void write_root_distribution(std::ostream& out, const RootDistribution& dist);

}  // namespace derivscope
