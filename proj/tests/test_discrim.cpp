#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "derivscope/discrim.hpp"
#include "derivscope/errors.hpp"
#include "support.hpp"

using namespace derivscope;

namespace {

Derivation tree(const std::string& json) { return parse_derivation(std::string_view(json), "root_strict"); }

// {a:2}
const std::string kTwoA = R"(["a", ["a", {"token":"x","le":"noun"}]])";
// {b:1}
const std::string kOneB = R"(["b", {"token":"y","le":"noun"}])";

RuleDataset dense(const std::vector<std::vector<double>>& rows, const std::vector<double>& labels) {
  RuleDataset d;
  const auto cols = rows.empty() ? 0 : rows[0].size();
  for (std::size_t j = 0; j < cols; ++j) d.features.push_back("f" + std::to_string(j));
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (rows[i][j] != 0.0) t.emplace_back(static_cast<int>(i), static_cast<int>(j), rows[i][j]);
    }
  }
  d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  d.x.setFromTriplets(t.begin(), t.end());
  d.y = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return d;
}

// Gradient of the smooth part, computed from dense copies.
Eigen::VectorXd loss_gradient(const RuleDataset& d, const Eigen::VectorXd& w, double c) {
  const Eigen::MatrixXd x = Eigen::MatrixXd(d.x);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = d.y(i) * x.row(i).dot(w);
    g -= c * d.y(i) / (1.0 + std::exp(m)) * x.row(i).transpose();
  }
  return g;
}

double independent_violation(const RuleDataset& d, const Eigen::VectorXd& w, double c) {
  const auto g = loss_gradient(d, w, c);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double v = w(j) != 0.0 ? std::abs(g(j) + (w(j) > 0 ? 1.0 : -1.0)) : std::max(0.0, std::abs(g(j)) - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

L1LogRegModel zero_model(const RuleDataset& d, int majority) {
  L1LogRegModel m;
  m.features = d.features;
  m.weights = Eigen::VectorXd::Zero(d.cols());
  m.majority_label = majority;
  return m;
}

}  // namespace

TEST_CASE("vectorize") {
  const auto d = vectorize({tree(kTwoA)}, {tree(kOneB)});
  CHECK(d.rows() == 2);
  CHECK(d.cols() == 2);
  CHECK(d.features == std::vector<std::string>{"a", "b"});
  CHECK(d.y(0) == 1.0);
  CHECK(d.y(1) == -1.0);
  CHECK(d.x.coeff(0, 0) == 2.0);
  CHECK(d.x.coeff(0, 1) == 0.0);
  CHECK(d.x.coeff(1, 1) == 1.0);

  const auto same = vectorize({tree(kTwoA)}, {tree(kTwoA)});
  CHECK(Eigen::MatrixXd(same.x).row(0) == Eigen::MatrixXd(same.x).row(1));
  CHECK(same.y(0) != same.y(1));

  const auto bin = vectorize({tree(kTwoA)}, {tree(kOneB)}, {.bag = {}, .binary = true});
  CHECK(bin.x.coeff(0, 0) == 1.0);
  CHECK_THROWS_AS(vectorize({}, {tree(kOneB)}), ConfigError);
  CHECK_THROWS_AS(vectorize({tree(kTwoA)}, {}), ConfigError);
}

TEST_CASE("split_train_val") {
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({static_cast<double>(i + 1)});
    y.push_back(i % 2 ? 1.0 : -1.0);
  }
  const auto d = dense(rows, y);
  const auto [tr, va] = split_train_val(d, 0.8, 3);
  CHECK(tr.rows() == 8);
  CHECK(va.rows() == 2);
  const auto [tr2, va2] = split_train_val(d, 0.8, 3);
  CHECK(Eigen::MatrixXd(tr.x) == Eigen::MatrixXd(tr2.x));
  CHECK(Eigen::MatrixXd(va.x) == Eigen::MatrixXd(va2.x));
  std::multiset<double> seen;
  for (const auto* part : {&tr, &va}) {
    for (Eigen::Index i = 0; i < part->rows(); ++i) seen.insert(part->x.coeff(i, 0));
  }
  CHECK(seen == std::multiset<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK_THROWS_AS(split_train_val(d, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(split_train_val(d, 0.0, 3), ConfigError);
}

TEST_CASE("fit agrees with a one-dimensional grid search") {
  // Feature present only in +1 rows.
  const auto d = dense({{1}, {1}, {1}, {1}, {1}, {0}, {0}, {0}, {0}, {0}}, {1, 1, 1, 1, 1, -1, -1, -1, -1, -1});
  for (double c : {0.5, 1.0, 3.0}) {
    const auto m = fit(d, {.c = c, .tol = 1e-10});
    double best_w = 0.0, best = l1_logistic_objective(d, Eigen::VectorXd::Zero(1), c);
    for (int k = 0; k <= 400000; ++k) {
      const double w = -2.0 + k * 1e-4 * 2.0;  // [-2, 6] in steps of 2e-4
      Eigen::VectorXd v(1);
      v << w;
      const double f = std::abs(w) + c * (5.0 * std::log1p(std::exp(-w)) + 5.0 * std::log(2.0));
      if (k % 1000 == 0) CHECK(f == doctest::Approx(l1_logistic_objective(d, v, c)).epsilon(1e-12));
      if (f < best) {
        best = f;
        best_w = w;
      }
    }
    INFO("c = " << c);
    CHECK(std::abs(m.weights(0) - best_w) <= 1e-3);
    // Closed form: 1 = 5c * sigmoid(-w) when 5c > 2, else w = 0.
    const double closed = 5.0 * c / 2.0 > 1.0 ? std::log(5.0 * c - 1.0) : 0.0;
    CHECK(m.weights(0) == doctest::Approx(closed).epsilon(1e-6));
    if (c > 0.5) CHECK(m.weights(0) > 0.0);
  }
}

TEST_CASE("fit satisfies the subgradient conditions") {
  const auto d = testing::planted_dataset(800, 20, 4, 12);
  for (double c : {0.01, 0.1, 1.0}) {
    const auto m = fit(d, {.c = c});
    INFO("c = " << c);
    CHECK(m.converged);
    CHECK(independent_violation(d, m.weights, c) <= 1e-4);
    CHECK(optimality_violation(d, m.weights, c) == doctest::Approx(independent_violation(d, m.weights, c)).epsilon(1e-6));
    CHECK(m.objective == doctest::Approx(l1_logistic_objective(d, m.weights, c)));
    REQUIRE_FALSE(m.trace.empty());
    for (std::size_t k = 1; k < m.trace.size(); ++k) CHECK(m.trace[k] <= m.trace[k - 1] + 1e-12);
  }
}

TEST_CASE("small c gives the zero model, as the subgradient bound predicts") {
  const auto d = testing::planted_dataset(500, 15, 3, 13);
  const double c = 1e-4;
  const Eigen::VectorXd bound = (c * (Eigen::MatrixXd(d.x).transpose() * d.y) / 2.0).cwiseAbs();
  REQUIRE(bound.maxCoeff() <= 1.0);
  const auto m = fit(d, {.c = c});
  CHECK(m.nonzeros() == 0);
  CHECK(m.weights.isZero(0.0));
}

TEST_CASE("separable data is classified perfectly") {
  SeededRng rng(5);
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int i = 0; i < 300; ++i) {
    const double label = rng.below(2) ? 1.0 : -1.0;
    // No intercept: each class needs a rule of its own to be separable.
    rows.push_back({label > 0 ? 1.0 : 0.0, label < 0 ? 1.0 : 0.0, static_cast<double>(rng.below(3)),
                    static_cast<double>(rng.below(2))});
    y.push_back(label);
  }
  const auto d = dense(rows, y);
  const auto [tr, va] = split_train_val(d, 0.8, 1);
  const auto m = fit(tr, {.c = 1.0});
  CHECK(m.weights(0) > 0.0);
  CHECK(m.weights(1) < 0.0);
  CHECK(evaluate(m, va).accuracy == 1.0);
  CHECK(evaluate(m, tr).accuracy == 1.0);
}

TEST_CASE("permutation equivariance") {
  const auto d = testing::planted_dataset(600, 12, 4, 14);
  const auto perm = seeded_permutation(12, 3);
  RuleDataset p = d;
  Eigen::MatrixXd dx(d.x), px(d.rows(), d.cols());
  for (std::size_t j = 0; j < 12; ++j) {
    px.col(static_cast<Eigen::Index>(j)) = dx.col(static_cast<Eigen::Index>(perm[j]));
    p.features[j] = d.features[perm[j]];
  }
  p.x = px.sparseView();
  const auto [tr, va] = split_train_val(d, 0.8, 2);
  const auto [ptr, pva] = split_train_val(p, 0.8, 2);
  const auto a = fit(tr, {.c = 0.1, .tol = 1e-9});
  const auto b = fit(ptr, {.c = 0.1, .tol = 1e-9});
  for (std::size_t j = 0; j < 12; ++j) {
    CHECK(b.weights(static_cast<Eigen::Index>(j)) ==
          doctest::Approx(a.weights(static_cast<Eigen::Index>(perm[j]))).epsilon(1e-5).scale(1.0));
  }
  CHECK(evaluate(a, va).accuracy == evaluate(b, pva).accuracy);
}

TEST_CASE("sparsity is monotone in c") {
  const auto d = testing::planted_dataset(2000, 40, 5, 15);
  const auto big = fit(d, {.c = 1.0}).nonzeros();
  const auto mid = fit(d, {.c = 0.1}).nonzeros();
  const auto small = fit(d, {.c = 0.01}).nonzeros();
  CHECK(big >= mid);
  CHECK(mid >= small);
  CHECK(big > small);
}

TEST_CASE("single-class training data is rejected") {
  const auto d = dense({{1}, {2}}, {1, 1});
  CHECK_THROWS_AS(fit(d), UndefinedStatistic);
}

TEST_CASE("evaluate: zero model equals the majority baseline") {
  const auto d = testing::planted_dataset(501, 6, 2, 16);
  const auto [tr, va] = split_train_val(d, 0.8, 4);
  const int majority = (tr.y.array() > 0).count() * 2 >= tr.rows() ? 1 : -1;
  const auto m = zero_model(tr, majority);
  const auto e = evaluate(m, va);
  const double share = static_cast<double>((va.y.array() == majority).count()) / static_cast<double>(va.rows());
  CHECK(e.accuracy == share);
  CHECK(e.baseline == share);
  CHECK(e.n == static_cast<std::size_t>(va.rows()));
}

TEST_CASE("discriminative_rules") {
  L1LogRegModel m;
  m.features = {"a", "b", "c"};
  m.weights = Eigen::Vector3d(2.0, -1.0, 0.0);
  const auto [pos, neg] = discriminative_rules(m);
  REQUIRE(pos.size() == 1);
  REQUIRE(neg.size() == 1);
  CHECK(pos[0].rule == "a");
  CHECK(neg[0].rule == "b");

  m.features = {"p1", "p2", "n1", "n2", "z"};
  m.weights = (Eigen::VectorXd(5) << 0.5, 1.5, -0.2, -3.0, 0.0).finished();
  const auto [p, n] = discriminative_rules(m, 1);
  CHECK(p[0].rule == "p2");
  CHECK(n[0].rule == "n2");

  m.weights.setZero();
  const auto [zp, zn] = discriminative_rules(m);
  CHECK(zp.empty());
  CHECK(zn.empty());
}

TEST_CASE("model file round trip") {
  const auto d = testing::planted_dataset(400, 10, 3, 17);
  const auto m = fit(d, {.c = 0.5});
  std::stringstream ss;
  write_model(ss, m);
  const auto back = read_model(ss, "model.tsv");
  CHECK(back.features.size() == m.nonzeros());
  CHECK((back.aligned_to(m.features) - m.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.options.c == m.options.c);
  CHECK(back.iterations == m.iterations);
  CHECK(back.majority_label == m.majority_label);
  const auto [tr, va] = split_train_val(d, 0.8, 0);
  CHECK(evaluate(back, va).accuracy == evaluate(m, va).accuracy);

  std::istringstream bad("rule\tweight\nr\tnope\n");
  CHECK_THROWS_AS(read_model(bad, "bad.tsv"), DataError);
}

TEST_CASE("discriminative table with descriptions") {
  std::istringstream desc("cl-cl_runon\tRun-on sentence\n");
  const auto map = read_descriptions(desc, "d.tsv");
  std::ostringstream out;
  write_discriminative_table(out, {{"cl-cl_runon", 1.2}}, {{"np_frg", -0.7}}, map);
  CHECK(out.str().find("Run-on sentence") != std::string::npos);
  CHECK(out.str().find("np_frg") != std::string::npos);
}
