#include "derivscope/discrim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "derivscope/errors.hpp"
#include "derivscope/random.hpp"
#include "derivscope/tsv.hpp"

namespace derivscope {

namespace {

using Triplet = Eigen::Triplet<double>;
using SparseCols = Eigen::SparseMatrix<double, Eigen::ColMajor>;

// log(1 + exp(-m)) without overflow
double softplus_neg(double m) { return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

}  // namespace

RuleDataset vectorize(const std::vector<Derivation>& reference, const std::vector<Derivation>& nmt,
                      const VectorizeOptions& options) {
  if (reference.empty() || nmt.empty()) throw ConfigError("vectorize needs non-empty reference and NMT sets");
  std::vector<RuleBag> bags;
  bags.reserve(reference.size() + nmt.size());
  std::set<std::string> labels;
  for (const auto* set : {&reference, &nmt}) {
    for (const auto& d : *set) {
      bags.push_back(bag_of_rules(d, options.bag));
      for (const auto& [rule, _] : bags.back()) labels.insert(rule);
    }
  }
  RuleDataset data;
  data.features.assign(labels.begin(), labels.end());
  std::map<std::string, Eigen::Index> column;
  for (std::size_t j = 0; j < data.features.size(); ++j) column[data.features[j]] = static_cast<Eigen::Index>(j);

  std::vector<Triplet> triplets;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    for (const auto& [rule, count] : bags[i]) {
      triplets.emplace_back(static_cast<Eigen::Index>(i), column[rule],
                            options.binary ? 1.0 : static_cast<double>(count));
    }
  }
  data.x.resize(static_cast<Eigen::Index>(bags.size()), static_cast<Eigen::Index>(data.features.size()));
  data.x.setFromTriplets(triplets.begin(), triplets.end());
  data.y.resize(static_cast<Eigen::Index>(bags.size()));
  data.y.head(static_cast<Eigen::Index>(reference.size())).setOnes();
  data.y.tail(static_cast<Eigen::Index>(nmt.size())).setConstant(-1.0);
  return data;
}

RuleDataset select_rows(const RuleDataset& data, const std::vector<std::size_t>& rows) {
  RuleDataset out;
  out.features = data.features;
  std::vector<Triplet> triplets;
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(rows[k]);
    for (SparseRows::InnerIterator it(data.x, i); it; ++it) {
      triplets.emplace_back(static_cast<Eigen::Index>(k), it.col(), it.value());
    }
    out.y(static_cast<Eigen::Index>(k)) = data.y(i);
  }
  out.x.resize(static_cast<Eigen::Index>(rows.size()), data.cols());
  out.x.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

std::pair<RuleDataset, RuleDataset> split_train_val(const RuleDataset& data, double train_fraction,
                                                     std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError(fmt::format("train fraction must lie strictly between 0 and 1, got {}", train_fraction));
  }
  const auto n = static_cast<std::size_t>(data.rows());
  const auto perm = seeded_permutation(n, seed);
  const auto ntrain = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(ntrain));
  std::vector<std::size_t> val(perm.begin() + static_cast<std::ptrdiff_t>(ntrain), perm.end());
  return {select_rows(data, train), select_rows(data, val)};
}

std::size_t L1LogRegModel::nonzeros() const {
  return static_cast<std::size_t>((weights.array() != 0.0).count());
}

Eigen::VectorXd L1LogRegModel::aligned_to(const std::vector<std::string>& other) const {
  std::map<std::string, double> by_rule;
  for (std::size_t j = 0; j < features.size(); ++j) by_rule[features[j]] = weights(static_cast<Eigen::Index>(j));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(other.size()));
  for (std::size_t j = 0; j < other.size(); ++j) {
    if (auto it = by_rule.find(other[j]); it != by_rule.end()) w(static_cast<Eigen::Index>(j)) = it->second;
  }
  return w;
}

double l1_logistic_objective(const RuleDataset& data, const Eigen::VectorXd& w, double c) {
  const Eigen::VectorXd margins = (data.x * w).cwiseProduct(data.y);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) loss += softplus_neg(margins(i));
  return w.lpNorm<1>() + c * loss;
}

double optimality_violation(const RuleDataset& data, const Eigen::VectorXd& w, double c) {
  const Eigen::VectorXd margins = (data.x * w).cwiseProduct(data.y);
  Eigen::VectorXd coeff(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) coeff(i) = -data.y(i) * sigmoid_neg(margins(i));
  const Eigen::VectorXd grad = c * (data.x.transpose() * coeff);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    double v;
    if (w(j) > 0.0) {
      v = std::abs(grad(j) + 1.0);
    } else if (w(j) < 0.0) {
      v = std::abs(grad(j) - 1.0);
    } else {
      v = std::max(0.0, std::abs(grad(j)) - 1.0);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

L1LogRegModel fit(const RuleDataset& train, const FitOptions& options) {
  if (!(options.c > 0.0)) throw ConfigError("c must be positive");
  if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");
  if (options.max_iter < 1) throw ConfigError("max_iter must be at least 1");
  const Eigen::Index n = train.rows();
  const Eigen::Index p = train.cols();
  const auto positives = (train.y.array() > 0.0).count();
  if (n == 0 || positives == 0 || positives == n) throw UndefinedStatistic("degenerate fit: training data has one class");

  const SparseCols x = train.x;  // column access for coordinate updates
  const double c = options.c;
  constexpr double kArmijo = 0.01;
  constexpr double kShrink = 0.5;
  constexpr int kMaxLineSearch = 30;

  L1LogRegModel model;
  model.features = train.features;
  model.options = options;
  model.majority_label = 2 * positives >= n ? 1 : -1;
  model.weights = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd& w = model.weights;
  Eigen::VectorXd margins = Eigen::VectorXd::Zero(n);  // y_i * w.x_i

  double objective = c * static_cast<double>(n) * std::log(2.0);
  model.trace.push_back(objective);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    double max_step = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      double g = 0.0;
      double h = 0.0;
      for (SparseCols::InnerIterator it(x, j); it; ++it) {
        const double s = sigmoid_neg(margins(it.row()));
        g -= train.y(it.row()) * it.value() * s;
        h += it.value() * it.value() * s * (1.0 - s);
      }
      g *= c;
      h = std::max(c * h, 1e-12);

      // Minimizer of g*d + h*d^2/2 + |w_j + d|.
      const double wj = w(j);
      double d;
      if (g + 1.0 <= h * wj) {
        d = -(g + 1.0) / h;
      } else if (g - 1.0 >= h * wj) {
        d = -(g - 1.0) / h;
      } else {
        d = -wj;
      }
      if (d == 0.0) continue;

      const double predicted = g * d + std::abs(wj + d) - std::abs(wj);
      double lambda = 1.0;
      for (int ls = 0; ls < kMaxLineSearch; ++ls) {
        const double step = lambda * d;
        double change = std::abs(wj + step) - std::abs(wj);
        for (SparseCols::InnerIterator it(x, j); it; ++it) {
          const double m = margins(it.row());
          change += c * (softplus_neg(m + step * train.y(it.row()) * it.value()) - softplus_neg(m));
        }
        if (change <= kArmijo * lambda * predicted) {
          w(j) = wj + step;
          for (SparseCols::InnerIterator it(x, j); it; ++it) {
            margins(it.row()) += step * train.y(it.row()) * it.value();
          }
          objective += change;
          max_step = std::max(max_step, std::abs(step));
          break;
        }
        lambda *= kShrink;
      }
    }
    model.trace.push_back(objective);
    model.iterations = iter;
    if (max_step < options.tol) {
      model.converged = true;
      break;
    }
  }
  model.objective = l1_logistic_objective(train, w, c);
  return model;
}

Evaluation evaluate(const L1LogRegModel& model, const RuleDataset& val) {
  Evaluation e;
  e.n = static_cast<std::size_t>(val.rows());
  if (e.n == 0) throw DataError("evaluation set is empty");
  const Eigen::VectorXd w = model.features == val.features ? model.weights : model.aligned_to(val.features);
  const Eigen::VectorXd scores = val.x * w;
  std::size_t correct = 0;
  std::size_t majority = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const int predicted = scores(i) > 0.0 ? 1 : scores(i) < 0.0 ? -1 : model.majority_label;
    const int label = val.y(i) > 0.0 ? 1 : -1;
    correct += predicted == label;
    majority += label == model.majority_label;
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(e.n);
  e.baseline = static_cast<double>(majority) / static_cast<double>(e.n);
  return e;
}

std::pair<std::vector<WeightedRule>, std::vector<WeightedRule>> discriminative_rules(const L1LogRegModel& model,
                                                                                      std::size_t k) {
  std::vector<WeightedRule> pos, neg;
  for (std::size_t j = 0; j < model.features.size(); ++j) {
    const double wj = model.weights(static_cast<Eigen::Index>(j));
    if (wj > 0.0) pos.push_back({model.features[j], wj});
    if (wj < 0.0) neg.push_back({model.features[j], wj});
  }
  auto by = [](bool descending) {
    return [descending](const WeightedRule& a, const WeightedRule& b) {
      if (a.weight != b.weight) return descending ? a.weight > b.weight : a.weight < b.weight;
      return a.rule < b.rule;
    };
  };
  std::sort(pos.begin(), pos.end(), by(true));
  std::sort(neg.begin(), neg.end(), by(false));
  if (pos.size() > k) pos.resize(k);
  if (neg.size() > k) neg.resize(k);
  return {std::move(pos), std::move(neg)};
}

void write_model(std::ostream& out, const L1LogRegModel& model) {
  out << "# c=" << tsv::format_double(model.options.c) << " tol=" << tsv::format_double(model.options.tol)
      << " max_iter=" << model.options.max_iter << " iterations=" << model.iterations
      << " converged=" << (model.converged ? 1 : 0) << " objective=" << tsv::format_double(model.objective)
      << " majority=" << model.majority_label << '\n';
  out << "rule\tweight\n";
  for (std::size_t j = 0; j < model.features.size(); ++j) {
    const double wj = model.weights(static_cast<Eigen::Index>(j));
    if (wj != 0.0) out << model.features[j] << '\t' << tsv::format_double(wj) << '\n';
  }
}

L1LogRegModel read_model(std::istream& in, std::string_view source_name) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw DataError(fmt::format("{}:1: missing model header", source_name));
  }
  L1LogRegModel model;
  std::istringstream header(line.substr(2));
  std::string kv;
  while (header >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DataError(fmt::format("{}:1: bad header field '{}'", source_name, kv));
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    double d = 0.0;
    std::int64_t i = 0;
    bool ok = true;
    if (key == "c") {
      ok = tsv::parse_double(value, model.options.c);
    } else if (key == "tol") {
      ok = tsv::parse_double(value, model.options.tol);
    } else if (key == "max_iter") {
      ok = tsv::parse_int(value, i);
      model.options.max_iter = static_cast<int>(i);
    } else if (key == "iterations") {
      ok = tsv::parse_int(value, i);
      model.iterations = static_cast<int>(i);
    } else if (key == "converged") {
      ok = tsv::parse_int(value, i);
      model.converged = i != 0;
    } else if (key == "objective") {
      ok = tsv::parse_double(value, d);
      model.objective = d;
    } else if (key == "majority") {
      ok = tsv::parse_int(value, i) && (i == 1 || i == -1);
      model.majority_label = static_cast<int>(i);
    }
    if (!ok) throw DataError(fmt::format("{}:1: bad value for '{}'", source_name, key));
  }
  if (!std::getline(in, line)) throw DataError(fmt::format("{}:2: missing column header", source_name));
  tsv::expect_header(line, "rule\tweight", source_name);
  std::vector<double> weights;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = tsv::split(line);
    double wv = 0.0;
    if (c.size() != 2 || c[0].empty() || !tsv::parse_double(c[1], wv)) {
      throw DataError(fmt::format("{}:{}: expected rule<TAB>weight", source_name, lineno));
    }
    model.features.push_back(c[0]);
    weights.push_back(wv);
  }
  model.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return model;
}

std::map<std::string, std::string> read_descriptions(std::istream& in, std::string_view source_name) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto c = tsv::split(line);
    if (c.size() != 2) throw DataError(fmt::format("{}:{}: expected rule<TAB>description", source_name, lineno));
    out[c[0]] = c[1];
  }
  return out;
}

void write_discriminative_table(std::ostream& out, const std::vector<WeightedRule>& positives,
                                const std::vector<WeightedRule>& negatives,
                                const std::map<std::string, std::string>& descriptions) {
  out << "rank\tref_rule\tref_weight\tref_description\tnmt_rule\tnmt_weight\tnmt_description\n";
  auto describe = [&descriptions](const std::string& rule) {
    auto it = descriptions.find(rule);
    return it == descriptions.end() ? std::string() : it->second;
  };
  const std::size_t rows = std::max(positives.size(), negatives.size());
  for (std::size_t i = 0; i < rows; ++i) {
    out << i + 1;
    for (const auto* side : {&positives, &negatives}) {
      if (i < side->size()) {
        const auto& r = (*side)[i];
        out << '\t' << r.rule << '\t' << tsv::format_double(r.weight) << '\t' << describe(r.rule);
      } else {
        out << "\t\t\t";
      }
    }
    out << '\n';
  }
}

}  // namespace derivscope
