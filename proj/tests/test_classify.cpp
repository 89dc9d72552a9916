#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "eegbio/classify.hpp"
#include "support.hpp"

using namespace eegbio;

namespace {

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("R" + std::to_string(1000 + i));
  return ids;
}

// four clusters of 10 coincident points at the XOR corners
void xor_data(Eigen::MatrixXd* x, std::vector<int>* y) {
  x->resize(40, 2);
  y->clear();
  for (int i = 0; i < 40; ++i) {
    const int a = (i / 10) % 2, b = i / 20;
    (*x)(i, 0) = a;
    (*x)(i, 1) = b;
    y->push_back(a ^ b);
  }
}

// best training accuracy of any single threshold on any feature, either labelling
double best_stump_accuracy(const Eigen::MatrixXd& x, const std::vector<int>& y) {
  double best = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      std::size_t hits = 0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) hits += (x(i, j) <= x(t, j)) == (y[static_cast<std::size_t>(i)] == 0);
      const double acc = static_cast<double>(hits) / static_cast<double>(x.rows());
      best = std::max({best, acc, 1.0 - acc});
    }
  return best;
}

double train_accuracy(const TreeModel& m, const Eigen::MatrixXd& x, const std::vector<int>& y) {
  const auto p = m.predict(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += p[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

// rows reaching every node, by routing the training data
std::vector<std::vector<Eigen::Index>> routed_rows(const TreeModel& m, const Eigen::MatrixXd& x) {
  std::vector<std::vector<Eigen::Index>> at(m.nodes().size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int n = 0;
    for (;;) {
      at[static_cast<std::size_t>(n)].push_back(i);
      const auto& node = m.nodes()[static_cast<std::size_t>(n)];
      if (node.is_leaf()) break;
      n = x(i, node.feature) <= node.threshold ? node.left : node.right;
    }
  }
  return at;
}

void noisy_problem(std::uint64_t seed, std::size_t n, std::size_t p, Eigen::MatrixXd* x, std::vector<int>* y) {
  Rng rng(seed);
  x->resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  y->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    (*y)[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < p; ++j)
      (*x)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal() + (j < 3 ? 0.8 * (*y)[i] : 0.0);
  }
}

}  // namespace

TEST(Prune, DuplicatedColumnDroppedOnce) {
  Rng rng(1);
  Eigen::MatrixXd x(50, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  x.col(2) = x.col(0);
  const auto r = correlation_prune(x, {"a", "b", "c"});
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{0, 1}));
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].feature, 2u);
}

TEST(Prune, NegatedColumnDropped) {
  Rng rng(2);
  Eigen::MatrixXd x(50, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  x.col(1) = -x.col(0);
  EXPECT_EQ(correlation_prune(x, {"a", "b"}).kept.size(), 1u);
}

TEST(Prune, ModerateCorrelationKept) {
  // r = 0.5 exactly by construction from orthonormal columns
  Eigen::MatrixXd u(4, 2);
  u << 1, 1, -1, 1, 1, -1, -1, -1;
  Eigen::MatrixXd x(4, 2);
  x.col(0) = u.col(0);
  x.col(1) = 0.5 * u.col(0) + std::sqrt(0.75) * u.col(1);
  EXPECT_NEAR(correlation_matrix(x)(0, 1), 0.5, 1e-12);
  EXPECT_EQ(correlation_prune(x, {"a", "b"}, 0.9).kept.size(), 2u);
}

TEST(Prune, ConstantColumnDroppedFirst) {
  Rng rng(3);
  Eigen::MatrixXd x(20, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  x.col(1).setConstant(4.0);
  log::Capture cap;
  const auto r = correlation_prune(x, {"a", "b", "c"});
  ASSERT_FALSE(r.dropped.empty());
  EXPECT_EQ(r.dropped[0].feature, 1u);
  EXPECT_EQ(r.dropped[0].reason, "constant");
  EXPECT_EQ(cap.messages().size(), 1u);
}

TEST(Prune, NoPairAboveThresholdRemains) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd base(60, 5), x(60, 20);
    for (Eigen::Index i = 0; i < base.size(); ++i) base(i) = rng.normal();
    for (Eigen::Index j = 0; j < 20; ++j)
      for (Eigen::Index i = 0; i < 60; ++i) x(i, j) = base(i, j % 5) + (0.05 + 0.05 * (j / 5)) * rng.normal();
    std::vector<std::string> names;
    for (int j = 0; j < 20; ++j) names.push_back("f" + std::to_string(j));
    const double threshold = 0.9;
    const auto r = correlation_prune(x, names, threshold);
    EXPECT_EQ(r.kept.size() + r.dropped.size(), 20u);
    Eigen::MatrixXd kept(60, static_cast<Eigen::Index>(r.kept.size()));
    for (std::size_t k = 0; k < r.kept.size(); ++k) kept.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(r.kept[k]));
    const auto c = correlation_matrix(kept);
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      for (Eigen::Index j = i + 1; j < c.cols(); ++j) EXPECT_LE(std::abs(c(i, j)), threshold);
  }
}

TEST(Tree, SeparableOneDimension) {
  Rng rng(4);
  Eigen::MatrixXd x(100, 1);
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = rng.uniform() * 2.0 - 1.0;
    y.push_back(x(i, 0) > 0.0);
  }
  const auto m = train_tree(x, y);
  EXPECT_EQ(train_accuracy(m, x, y), 1.0);
  ASSERT_EQ(m.nodes().size(), 3u);
  EXPECT_NEAR(m.nodes()[0].threshold, 0.0, 0.05);
  EXPECT_EQ(top_k_importance(m, 1), std::vector<std::size_t>{0});
  EXPECT_EQ(m.importance()[0], 1.0);
}

TEST(Tree, XorNeedsDepthTwo) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  xor_data(&x, &y);
  TreeParams p;
  p.min_leaf = 1;
  p.max_depth = 2;
  EXPECT_EQ(train_accuracy(train_tree(x, y, p), x, y), 1.0);
  p.max_depth = 1;
  const double oracle = best_stump_accuracy(x, y);
  EXPECT_LE(oracle, 0.75);
  EXPECT_LE(train_accuracy(train_tree(x, y, p), x, y), oracle);
}

TEST(Tree, FourPointXorStumpOracle) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y = {0, 0, 1, 1};
  EXPECT_LE(best_stump_accuracy(x, y), 0.75);
  TreeParams p;
  p.min_leaf = 1;
  p.max_depth = 2;
  EXPECT_EQ(train_accuracy(train_tree(x, y, p), x, y), 1.0);
}

TEST(Tree, PureNodeNeverSplits) {
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  const std::vector<int> y(6, 1);
  log::Capture cap;
  const auto m = train_tree(x, y);
  EXPECT_EQ(m.nodes().size(), 1u);
  EXPECT_EQ(cap.messages().size(), 1u);
  EXPECT_EQ(m.importance()[0], 0.0);
}

TEST(Tree, StructuralInvariants) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(5, 120, 6, &x, &y);
  const auto m = train_tree(x, y);
  const auto at = routed_rows(m, x);
  double imp_sum = 0.0;
  for (double v : m.importance()) {
    EXPECT_GE(v, 0.0);
    imp_sum += v;
  }
  EXPECT_NEAR(imp_sum, 1.0, 1e-12);
  for (std::size_t k = 0; k < m.nodes().size(); ++k) {
    const auto& n = m.nodes()[k];
    std::array<std::size_t, 2> counts{};
    for (auto i : at[k]) ++counts[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
    EXPECT_EQ(counts, n.counts);
    EXPECT_GE(n.n(), static_cast<std::size_t>(m.params().min_leaf));
    if (n.is_leaf()) continue;
    std::vector<double> v;
    for (auto i : at[k]) v.push_back(x(i, n.feature));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    bool midpoint = false;
    for (std::size_t t = 0; t + 1 < v.size(); ++t) midpoint |= n.threshold == 0.5 * (v[t] + v[t + 1]);
    EXPECT_TRUE(midpoint) << "node " << k;
  }
  EXPECT_LE(m.depth(), m.params().max_depth);
}

TEST(Tree, MonotoneTransformKeepsPredictions) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(6, 100, 4, &x, &y);
  Eigen::MatrixXd t = x;
  t.col(1) = x.col(1).array().exp();
  t.col(2) = 3.0 * x.col(2).array().pow(3) - 1.0;
  EXPECT_EQ(train_tree(x, y).predict(x), train_tree(t, y).predict(t));
}

TEST(Tree, TextRoundTrip) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(7, 80, 5, &x, &y);
  const auto m = train_tree(x, y, {}, {"a", "b", "c", "d", "e"});
  const auto text = format_tree(m);
  const auto back = parse_tree(text);
  EXPECT_EQ(back, m);
  EXPECT_EQ(format_tree(back), text);
}

TEST(Tree, InvalidParamsRejected) {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  const std::vector<int> y = {0, 0, 1, 1};
  TreeParams p;
  p.max_depth = 0;
  EXPECT_THROW(train_tree(x, y, p), ParameterError);
  p.max_depth = 2;
  p.min_leaf = 0;
  EXPECT_THROW(train_tree(x, y, p), ParameterError);
}

TEST(TopK, OrderAndOverflow) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(8, 150, 8, &x, &y);
  const auto m = train_tree(x, y);
  const auto order = top_k_importance(m, 8);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double a = m.importance()[order[k - 1]], b = m.importance()[order[k]];
    EXPECT_TRUE(a > b || (a == b && order[k - 1] < order[k]));
  }
  log::Capture cap;
  EXPECT_EQ(top_k_importance(m, 20).size(), 8u);
  EXPECT_EQ(cap.messages().size(), 1u);
}

TEST(Select, ZeroThresholdSelectsAll) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(9, 80, 6, &x, &y);
  const auto ids = ids_for(80);
  SelectOptions o;
  o.threshold = 0.0;
  const auto s = greedy_feature_select(x, y, ids, o);
  EXPECT_EQ(s.selected.size(), 6u);
  EXPECT_NEAR(std::accumulate(s.weights.begin(), s.weights.end(), 0.0), 1.0, 1e-12);
}

TEST(Select, ImpossibleThresholdIsSelectionError) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(10, 60, 3, &x, &y);
  SelectOptions o;
  o.threshold = 1.01;
  EXPECT_THROW(greedy_feature_select(x, y, ids_for(60), o), SelectionError);
}

TEST(Select, FindsTheInformativeFeature) {
  Rng rng(11);
  const std::size_t n = 200, p = 51, informative = 17;
  Eigen::MatrixXd x(n, p);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal();
    // class means 3.3 SD apart: Bayes accuracy about 0.95
    x(static_cast<Eigen::Index>(i), informative) += 3.3 * y[i];
  }
  SelectOptions o;
  o.threshold = 0.8;
  const auto s = greedy_feature_select(x, y, ids_for(n), o);
  EXPECT_EQ(s.selected, std::vector<std::size_t>{informative});
  EXPECT_GE(s.accuracy[informative], 0.85);
  double noise = 0.0;
  for (std::size_t j = 0; j < p; ++j)
    if (j != informative) noise += s.accuracy[j];
  EXPECT_NEAR(noise / (p - 1), 0.5, 0.05);
  for (std::size_t k = 0; k < s.selected.size(); ++k) EXPECT_GE(s.accuracy[s.selected[k]], o.threshold);
}

TEST(Select, VacuousSelectionReproducesFullTree) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(12, 120, 5, &x, &y);
  SelectOptions o;
  o.threshold = 0.0;
  const auto s = greedy_feature_select(x, y, ids_for(120), o);
  const std::vector<std::string> names = {"a", "b", "c", "d", "e"};
  // leaves of 10+ rows keep equal-gain ties (where the weight order would act) out of reach
  TreeParams p;
  p.max_depth = 4;
  p.min_leaf = 10;
  EXPECT_EQ(train_selected(x, y, s, p, names), train_tree(x, y, p, names));
}

TEST(Select, Deterministic) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  noisy_problem(13, 100, 6, &x, &y);
  SelectOptions o;
  o.cv.seed = 99;
  const auto a = greedy_feature_select(x, y, ids_for(100), o);
  o.cv.threads = 3;
  const auto b = greedy_feature_select(x, y, ids_for(100), o);
  EXPECT_EQ(a, b);
  EXPECT_EQ(train_selected(x, y, a, {}), train_selected(x, y, b, {}));
}

TEST(CohensD, HandValue) {
  const std::vector<double> a = {2, 4}, b = {1, 3};
  EXPECT_NEAR(cohens_d(a, b), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cohens_d(b, a), -1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(cohens_d(a, a), 0.0);
}

TEST(CohensD, AffineInvariance) {
  Rng rng(14);
  std::vector<double> a(30), b(25);
  for (auto& v : a) v = rng.normal() + 0.7;
  for (auto& v : b) v = rng.normal();
  const double d = cohens_d(a, b);
  auto map = [](std::vector<double> v, double s, double o) {
    for (auto& x : v) x = s * x + o;
    return v;
  };
  EXPECT_NEAR(cohens_d(map(a, 3.5, -2.0), map(b, 3.5, -2.0)), d, 1e-12);
  EXPECT_NEAR(cohens_d(map(a, -0.5, 1.0), map(b, -0.5, 1.0)), -d, 1e-12);
}

TEST(CohensD, Degenerate) {
  const std::vector<double> one = {1.0}, two = {1.0, 2.0}, flat = {5.0, 5.0};
  EXPECT_THROW(cohens_d(one, two), DataError);
  EXPECT_THROW(cohens_d(flat, flat), UndefinedRatioError);
}
