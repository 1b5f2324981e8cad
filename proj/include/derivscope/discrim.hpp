#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "derivscope/derivation.hpp"

namespace derivscope {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Bag-of-rules design matrix. Labels are +1 for reference rows, -1 for NMT rows.
struct RuleDataset {
  std::vector<std::string> features;  // column -> rule label, sorted
  SparseRows x;
  Eigen::VectorXd y;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

struct VectorizeOptions {
  RuleBagOptions bag;
  bool binary = false;  // presence instead of counts
};

/// Feature space is the union of rule labels; reference rows come first.
/// Throws ConfigError when either set is empty.
RuleDataset vectorize(const std::vector<Derivation>& reference, const std::vector<Derivation>& nmt,
                      const VectorizeOptions& options = {});

RuleDataset select_rows(const RuleDataset& data, const std::vector<std::size_t>& rows);

/// Seeded shuffle, then the first round(train_fraction * n) rows train.
std::pair<RuleDataset, RuleDataset> split_train_val(const RuleDataset& data, double train_fraction,
                                                     std::uint64_t seed);

struct FitOptions {
  double c = 0.01;  // multiplies the summed log-loss
  double tol = 1e-6;
  int max_iter = 1000;
};

struct L1LogRegModel {
  std::vector<std::string> features;
  Eigen::VectorXd weights;
  FitOptions options;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;  // final, recomputed from scratch
  std::vector<double> trace;  // objective after each sweep, starting at w = 0
  int majority_label = 1;     // training majority; breaks sign(0)

  std::size_t nonzeros() const;
  /// Weights re-indexed onto another feature list; unknown rules weigh 0.
  Eigen::VectorXd aligned_to(const std::vector<std::string>& other) const;
};

/// ||w||_1 + c * sum_i log(1 + exp(-y_i w.x_i)).
double l1_logistic_objective(const RuleDataset& data, const Eigen::VectorXd& w, double c);

/// Largest violation of the L1 subgradient optimality conditions at w.
double optimality_violation(const RuleDataset& data, const Eigen::VectorXd& w, double c);

/// Cyclic coordinate descent with per-coordinate soft-thresholded Newton
/// steps and an Armijo line search. No intercept. Throws UndefinedStatistic
/// on single-class data.
L1LogRegModel fit(const RuleDataset& train, const FitOptions& options = {});

struct Evaluation {
  double accuracy = 0.0;
  double baseline = 0.0;  // share of rows labelled with the training majority
  std::size_t n = 0;
};

Evaluation evaluate(const L1LogRegModel& model, const RuleDataset& val);

struct WeightedRule {
  std::string rule;
  double weight = 0.0;
};

/// Positive weights descending, negative weights ascending; zeros excluded.
std::pair<std::vector<WeightedRule>, std::vector<WeightedRule>> discriminative_rules(const L1LogRegModel& model,
                                                                                      std::size_t k = 10);

void write_model(std::ostream& out, const L1LogRegModel& model);
/// Restores weights and header metadata; the trace is not stored.
L1LogRegModel read_model(std::istream& in, std::string_view source_name);

/// rule<TAB>description lines.
std::map<std::string, std::string> read_descriptions(std::istream& in, std::string_view source_name);

void write_discriminative_table(std::ostream& out, const std::vector<WeightedRule>& positives,
                                const std::vector<WeightedRule>& negatives,
                                const std::map<std::string, std::string>& descriptions = {});

}  // namespace derivscope
