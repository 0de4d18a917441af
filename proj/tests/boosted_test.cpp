#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "harmclf/boosted.hpp"
#include "support/oracles.hpp"

using namespace harmclf;

namespace {

EmbeddingMatrix matrix(const std::vector<std::vector<double>>& rows) {
  EmbeddingMatrix m;
  m.dim = rows.empty() ? 0 : rows[0].size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.ids.push_back("r" + std::to_string(i));
    m.values.insert(m.values.end(), rows[i].begin(), rows[i].end());
  }
  return m;
}

struct Fixture {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

Fixture random_fixture(std::mt19937_64& rng, std::size_t n, std::size_t dim, int grid) {
  Fixture f;
  std::uniform_int_distribution<int> cell(0, grid);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(dim);
    for (auto& v : r) v = cell(rng) / static_cast<double>(grid);
    // Noisy linear rule keeps both classes and leaves some structure to find.
    f.labels.push_back(r[0] + 0.5 * r[dim - 1] + 0.3 * (cell(rng) / static_cast<double>(grid)) > 0.9 ? 1 : 0);
    f.rows.push_back(std::move(r));
  }
  return f;
}

// Members of each node, found by routing every row from the root.
std::vector<std::vector<std::size_t>> node_members(const RegressionTree& tree,
                                                   const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::size_t>> members(tree.nodes.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t i = 0;
    members[i].push_back(r);
    while (!tree.nodes[i].is_leaf()) {
      const auto& n = tree.nodes[i];
      i = static_cast<std::size_t>(rows[r][static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
      members[i].push_back(r);
    }
  }
  return members;
}

}  // namespace

TEST(Boosted, SingleLeafOnAllPositive) {
  const auto X = matrix({{0.1}, {0.2}, {0.3}, {0.4}});
  const std::vector<int> y{1, 1, 1, 1};
  BoostParams p;
  p.n_rounds = 1;
  p.max_depth = 0;
  p.lambda = 0.0;
  p.learning_rate = 0.3;
  const auto model = train_boosted(X, y, std::nullopt, p);
  ASSERT_EQ(model.trees.size(), 1u);
  ASSERT_EQ(model.trees[0].nodes.size(), 1u);
  // g = -0.5 and h = 0.25 per row: leaf = 2 / 1.
  EXPECT_DOUBLE_EQ(model.trees[0].nodes[0].value, 2.0);
  for (double prob : predict_proba(model, X)) {
    EXPECT_NEAR(prob, 0.645656, 1e-6);
    EXPECT_NEAR(prob, 1.0 / (1.0 + std::exp(-0.6)), 1e-9);
  }
}

TEST(Boosted, ZeroRoundsPredictsHalf) {
  const auto X = matrix({{0.0}, {1.0}});
  BoostParams p;
  p.n_rounds = 0;
  const auto model = train_boosted(X, std::vector<int>{0, 1}, std::nullopt, p);
  for (double prob : predict_proba(model, X)) EXPECT_EQ(prob, 0.5);
}

TEST(Boosted, HandBuiltStump) {
  TreeEnsemble model;
  model.learning_rate = 1.0;
  model.feature_dim = 1;
  RegressionTree t;
  t.nodes = {TreeNode{0, 0.5, 1, 2, 1.0, 0.0}, TreeNode{-1, 0, -1, -1, 0, -2.0}, TreeNode{-1, 0, -1, -1, 0, 2.0}};
  model.trees.push_back(t);
  const auto p = predict_proba(model, matrix({{0.0}, {1.0}, {0.5}}));
  EXPECT_NEAR(p[0], 1.0 - 0.8807970779778823, 1e-12);
  EXPECT_NEAR(p[1], 0.8807970779778823, 1e-12);
  EXPECT_EQ(p[2], p[1]);  // x == threshold goes right
}

TEST(Boosted, SeparableStumpsReachPerfectAccuracy) {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({static_cast<double>(i)});
    y.push_back(i >= 10 ? 1 : 0);
  }
  BoostParams p;
  p.n_rounds = 10;
  p.max_depth = 1;
  const auto model = train_boosted(matrix(rows), y, std::nullopt, p);
  const auto probs = predict_proba(model, matrix(rows));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(probs[i] >= 0.5 ? 1 : 0, y[i]) << i;
  EXPECT_DOUBLE_EQ(model.trees[0].nodes[0].threshold, 9.5);
}

TEST(Boosted, TrainingLossNeverIncreases) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_fixture(rng, 80, 3, 20);
    const auto X = matrix(f.rows);
    for (auto params : {BoostParams::xgb_like(), BoostParams::lgbm_like()}) {
      params.n_rounds = 15;
      const auto model = train_boosted(X, f.labels, std::nullopt, params);
      std::vector<double> logits(f.rows.size(), 0.0);
      double previous = weighted_logloss(logits, f.labels, std::nullopt);
      for (const auto& tree : model.trees) {
        for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += model.learning_rate * tree.predict(X.row(i));
        const double loss = weighted_logloss(logits, f.labels, std::nullopt);
        EXPECT_LE(loss, previous + 1e-12);
        previous = loss;
      }
    }
  }
}

TEST(Boosted, ConstantWeightsDoNotChangeStructure) {
  std::mt19937_64 rng(4);
  const auto f = random_fixture(rng, 60, 3, 15);
  const auto X = matrix(f.rows);
  BoostParams p;
  p.lambda = 0.0;
  p.min_child_hessian = 0.0;
  p.n_rounds = 5;
  p.max_depth = 3;
  const std::vector<double> w(f.rows.size(), 2.5);
  const auto plain = train_boosted(X, f.labels, std::nullopt, p);
  const auto weighted = train_boosted(X, f.labels, std::span<const double>(w), p);
  ASSERT_EQ(plain.trees.size(), weighted.trees.size());
  for (std::size_t t = 0; t < plain.trees.size(); ++t) {
    ASSERT_EQ(plain.trees[t].nodes.size(), weighted.trees[t].nodes.size());
    for (std::size_t k = 0; k < plain.trees[t].nodes.size(); ++k) {
      const auto &a = plain.trees[t].nodes[k], &b = weighted.trees[t].nodes[k];
      EXPECT_EQ(a.feature, b.feature);
      EXPECT_EQ(a.threshold, b.threshold);
      if (a.is_leaf()) EXPECT_NEAR(a.value, b.value, 1e-9 * std::max(1.0, std::abs(a.value)));
    }
  }
}

// Every internal node's split must be as good as the best one found by
// brute-force enumeration over the rows that reach it, and every leaf must
// carry the closed-form Newton value for those rows.
TEST(Boosted, SplitsMatchExhaustiveSearch) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_fixture(rng, 30 + rng() % 50, 1 + rng() % 4, trial % 2 ? 6 : 1000);
    const auto X = matrix(f.rows);
    BoostParams p;
    p.n_rounds = 3;
    p.max_depth = 3;
    p.lambda = trial % 3 == 0 ? 0.0 : 1.0;
    p.min_child_hessian = trial % 3 == 0 ? 1e-3 : 0.5;
    const auto model = train_boosted(X, f.labels, std::nullopt, p);

    std::vector<double> logits(f.rows.size(), 0.0);
    for (const auto& tree : model.trees) {
      std::vector<double> g(logits.size()), h(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-logits[i]));
        g[i] = prob - f.labels[i];
        h[i] = prob * (1.0 - prob);
      }
      const auto members = node_members(tree, f.rows);
      for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        const auto& node = tree.nodes[k];
        if (node.is_leaf()) {
          double G = 0, H = 0;
          for (auto r : members[k]) {
            G += g[r];
            H += h[r];
          }
          EXPECT_NEAR(node.value, -G / (H + p.lambda), 1e-9 * std::max(1.0, std::abs(node.value)));
          continue;
        }
        const auto scan = oracle::exhaustive_split(f.rows, g, h, members[k], p.lambda, p.gamma, p.min_child_hessian);
        EXPECT_GE(node.gain, scan.best_gain - 1e-9 * std::max(1.0, std::abs(scan.best_gain)))
            << "trial " << trial << " node " << k;
        EXPECT_LE(node.gain, scan.best_gain + 1e-9 * std::max(1.0, std::abs(scan.best_gain)));
      }
      for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += model.learning_rate * tree.predict(X.row(i));
    }
  }
}

TEST(Boosted, LeafWiseRespectsBudget) {
  std::mt19937_64 rng(6);
  const auto f = random_fixture(rng, 400, 4, 1000);
  auto p = BoostParams::lgbm_like();
  p.n_rounds = 5;
  p.max_leaves = 7;
  p.min_child_samples = 5;
  const auto model = train_boosted(matrix(f.rows), f.labels, std::nullopt, p);
  for (const auto& tree : model.trees) {
    EXPECT_LE(tree.leaf_count(), 7u);
    const auto members = node_members(tree, f.rows);
    for (std::size_t k = 0; k < tree.nodes.size(); ++k)
      if (tree.nodes[k].is_leaf()) EXPECT_GE(members[k].size(), 5u);
  }
  EXPECT_EQ(model.trees[0].leaf_count(), 7u);
}

TEST(Boosted, JsonRoundTripIsExact) {
  std::mt19937_64 rng(8);
  const auto f = random_fixture(rng, 100, 3, 1000);
  const auto X = matrix(f.rows);
  auto p = BoostParams::xgb_like();
  p.n_rounds = 10;
  const auto model = train_boosted(X, f.labels, std::nullopt, p);
  const std::string text = to_json(model).dump();
  const auto back = ensemble_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(to_json(back).dump(), text);
  EXPECT_EQ(predict_logits(back, X), predict_logits(model, X));
  // Training is deterministic.
  EXPECT_EQ(to_json(train_boosted(X, f.labels, std::nullopt, p)).dump(), text);

  auto broken = nlohmann::json::parse(text);
  broken["version"] = 99;
  EXPECT_ANY_THROW(ensemble_from_json(broken));
}

TEST(Boosted, RejectsBadInput) {
  const auto X = matrix({{0.0}, {1.0}});
  const BoostParams p;
  EXPECT_THROW(train_boosted(X, std::vector<int>{0}, std::nullopt, p), ShapeError);
  EXPECT_THROW(train_boosted(matrix({}), std::vector<int>{}, std::nullopt, p), EmptyDataset);
  auto bad = X;
  bad.values[1] = std::nan("");
  EXPECT_THROW(train_boosted(bad, std::vector<int>{0, 1}, std::nullopt, p), NonFiniteInput);
  bad.values[1] = INFINITY;
  EXPECT_THROW(train_boosted(bad, std::vector<int>{0, 1}, std::nullopt, p), NonFiniteInput);
  EXPECT_THROW(train_boosted(X, std::vector<int>{0, 2}, std::nullopt, p), ShapeError);
  const std::vector<double> w{1.0, 0.0};
  EXPECT_THROW(train_boosted(X, std::vector<int>{0, 1}, std::span<const double>(w), p), NonFiniteInput);
  BoostParams neg;
  neg.learning_rate = 0.0;
  EXPECT_THROW(train_boosted(X, std::vector<int>{0, 1}, std::nullopt, neg), ConfigError);
  const auto model = train_boosted(X, std::vector<int>{0, 1}, std::nullopt, p);
  EXPECT_THROW(predict_proba(model, matrix({{0.0, 1.0}})), ShapeError);
}
