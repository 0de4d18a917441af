#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmclf/embeddings.hpp"
#include "harmclf/error.hpp"

namespace harmclf {

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

enum class TreeGrowth { depth_wise, leaf_wise };

inline std::string_view to_string(TreeGrowth g) {
  return g == TreeGrowth::depth_wise ? "depth_wise" : "leaf_wise";
}

inline TreeGrowth parse_growth(std::string_view s) {
  if (s == "depth_wise") return TreeGrowth::depth_wise;
  if (s == "leaf_wise") return TreeGrowth::leaf_wise;
  throw ConfigError("unknown tree growth '" + std::string(s) + "'");
}

struct BoostParams {
  int n_rounds = 100;
  int max_depth = 6;
  double learning_rate = 0.3;
  double lambda = 1.0;             // L2 penalty on leaf values
  double min_child_hessian = 1.0;  // minimum hessian sum per child
  double gamma = 0.0;              // gain a split must exceed
  int max_leaves = 0;              // 0 = no leaf budget
  int min_child_samples = 0;
  TreeGrowth growth = TreeGrowth::depth_wise;
  std::int64_t seed = 0;

  // Level-wise trees with the usual xgboost defaults.
  static BoostParams xgb_like() { return {}; }

  // Best-first trees with a 31-leaf budget and the usual lightgbm defaults.
  static BoostParams lgbm_like() {
    BoostParams p;
    p.n_rounds = 100;
    p.max_depth = 30;
    p.learning_rate = 0.1;
    p.lambda = 0.0;
    p.min_child_hessian = 1e-3;
    p.gamma = 0.0;
    p.max_leaves = 31;
    p.min_child_samples = 20;
    p.growth = TreeGrowth::leaf_wise;
    return p;
  }

  void validate() const {
    if (n_rounds < 0) throw ConfigError("boost.n_rounds must be non-negative");
    if (max_depth < 0) throw ConfigError("boost.max_depth must be non-negative");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw ConfigError("boost.learning_rate must lie in (0, 1]");
    if (!(lambda >= 0.0)) throw ConfigError("boost.lambda must be non-negative");
    if (!(min_child_hessian >= 0.0)) throw ConfigError("boost.min_child_hessian must be non-negative");
    if (!(gamma >= 0.0)) throw ConfigError("boost.gamma must be non-negative");
    if (max_leaves < 0 || max_leaves == 1) throw ConfigError("boost.max_leaves must be 0 or >= 2");
    if (min_child_samples < 0) throw ConfigError("boost.min_child_samples must be non-negative");
  }
};

inline void to_json(nlohmann::json& j, const BoostParams& p) {
  j = {{"n_rounds", p.n_rounds},
       {"max_depth", p.max_depth},
       {"learning_rate", p.learning_rate},
       {"lambda", p.lambda},
       {"min_child_hessian", p.min_child_hessian},
       {"gamma", p.gamma},
       {"max_leaves", p.max_leaves},
       {"min_child_samples", p.min_child_samples},
       {"growth", to_string(p.growth)},
       {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, BoostParams& p) {
  j.at("n_rounds").get_to(p.n_rounds);
  j.at("max_depth").get_to(p.max_depth);
  j.at("learning_rate").get_to(p.learning_rate);
  j.at("lambda").get_to(p.lambda);
  j.at("min_child_hessian").get_to(p.min_child_hessian);
  j.at("gamma").get_to(p.gamma);
  j.at("max_leaves").get_to(p.max_leaves);
  j.at("min_child_samples").get_to(p.min_child_samples);
  p.growth = parse_growth(j.at("growth").get<std::string>());
  j.at("seed").get_to(p.seed);
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x[feature] < threshold
  int right = -1;
  double gain = 0.0;
  double value = 0.0;  // leaf logit increment, before learning-rate scaling

  bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                          : n.right);
    }
    return nodes[i].value;
  }

  // Index of the leaf x lands in.
  std::size_t route(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                          : n.right);
    }
    return i;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }
};

struct TreeEnsemble {
  static constexpr int kFormatVersion = 1;

  double base_score = 0.0;
  double learning_rate = 0.3;
  std::size_t feature_dim = 0;
  BoostParams params;
  std::vector<RegressionTree> trees;

  double logit(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(x);
    return base_score + learning_rate * sum;
  }
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = -std::numeric_limits<double>::infinity();
};

// Regularized leaf objective G^2 / (H + lambda).
inline double leaf_score(double g, double h, double lambda) {
  const double denom = h + lambda;
  return denom > 0.0 ? g * g / denom : 0.0;
}

inline double leaf_value(double g, double h, double lambda) {
  const double denom = h + lambda;
  return denom > 0.0 ? -g / denom : 0.0;
}

inline double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  return 0.5 * (leaf_score(gl, hl, lambda) + leaf_score(gr, hr, lambda) -
                leaf_score(gl + gr, hl + hr, lambda)) -
         gamma;
}

// Midpoint strictly above lo and at most hi.
inline double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) * 0.5;
  return mid > lo ? mid : hi;
}

namespace detail {

inline constexpr double kGainNoiseFloor = 1e-12;

struct GrowNode {
  std::vector<std::size_t> members;  // ascending row indices
  double g = 0.0;
  double h = 0.0;
  int depth = 0;
  std::size_t node_index = 0;
  SplitCandidate best;
};

// Exact greedy search over every feature and every midpoint between
// consecutive distinct values. Ties keep the lowest feature, then the
// lowest threshold.
inline SplitCandidate find_best_split(const EmbeddingMatrix& X, std::span<const double> grad,
                                      std::span<const double> hess, const GrowNode& node,
                                      const BoostParams& params) {
  SplitCandidate best;
  const std::size_t n = node.members.size();
  if (n < 2) return best;
  std::vector<std::size_t> order;
  const auto min_samples = static_cast<std::size_t>(params.min_child_samples);
  for (std::size_t f = 0; f < X.dim; ++f) {
    order = node.members;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return X(a, f) < X(b, f); });
    double gl = 0.0, hl = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      gl += grad[order[k]];
      hl += hess[order[k]];
      const double lo = X(order[k], f);
      const double hi = X(order[k + 1], f);
      if (!(lo < hi)) continue;
      const std::size_t n_left = k + 1;
      if (n_left < min_samples || n - n_left < min_samples) continue;
      const double gr = node.g - gl;
      const double hr = node.h - hl;
      if (hl < params.min_child_hessian || hr < params.min_child_hessian) continue;
      // Improvements at rounding-noise level (pure nodes) are not splits.
      const double sl = leaf_score(gl, hl, params.lambda), sr = leaf_score(gr, hr, params.lambda);
      const double sp = leaf_score(node.g, node.h, params.lambda);
      if (0.5 * (sl + sr - sp) <= kGainNoiseFloor * (sl + sr + sp)) continue;
      const double gain = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
      if (gain > best.gain) {
        best.feature = static_cast<int>(f);
        best.threshold = split_threshold(lo, hi);
        best.gain = gain;
      }
    }
  }
  return best;
}

inline GrowNode make_node(std::vector<std::size_t> members, std::span<const double> grad,
                          std::span<const double> hess, int depth, std::size_t node_index) {
  GrowNode node;
  node.members = std::move(members);
  for (const std::size_t i : node.members) {
    node.g += grad[i];
    node.h += hess[i];
  }
  node.depth = depth;
  node.node_index = node_index;
  return node;
}

inline RegressionTree grow_tree(const EmbeddingMatrix& X, std::span<const double> grad,
                                std::span<const double> hess, const BoostParams& params) {
  RegressionTree tree;
  std::vector<std::size_t> all(X.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  tree.nodes.emplace_back();
  std::vector<GrowNode> open;
  open.push_back(make_node(std::move(all), grad, hess, 0, 0));

  auto can_split = [&](const GrowNode& node) { return node.depth < params.max_depth; };
  auto finalize_leaf = [&](const GrowNode& node) {
    auto& out = tree.nodes[node.node_index];
    out.feature = -1;
    out.value = leaf_value(node.g, node.h, params.lambda);
  };
  std::size_t leaves = 1;
  auto budget_left = [&] { return params.max_leaves == 0 || leaves < static_cast<std::size_t>(params.max_leaves); };

  auto split_node = [&](GrowNode& node, std::vector<GrowNode>& children) {
    const auto f = static_cast<std::size_t>(node.best.feature);
    std::vector<std::size_t> left, right;
    for (const std::size_t i : node.members) (X(i, f) < node.best.threshold ? left : right).push_back(i);
    const auto left_index = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& out = tree.nodes[node.node_index];
    out.feature = node.best.feature;
    out.threshold = node.best.threshold;
    out.gain = node.best.gain;
    out.left = static_cast<int>(left_index);
    out.right = static_cast<int>(left_index + 1);
    ++leaves;
    children.push_back(make_node(std::move(left), grad, hess, node.depth + 1, left_index));
    children.push_back(make_node(std::move(right), grad, hess, node.depth + 1, left_index + 1));
  };

  if (params.growth == TreeGrowth::depth_wise) {
    while (!open.empty()) {
      std::vector<GrowNode> next;
      for (auto& node : open) {
        if (can_split(node) && budget_left()) {
          node.best = find_best_split(X, grad, hess, node, params);
          if (node.best.feature >= 0 && node.best.gain > 0.0) {
            split_node(node, next);
            continue;
          }
        }
        finalize_leaf(node);
      }
      open = std::move(next);
    }
    return tree;
  }

  // Leaf-wise: repeatedly split the open leaf with the largest gain
  // (ties: lowest node index).
  for (auto& node : open)
    if (can_split(node)) node.best = find_best_split(X, grad, hess, node, params);
  while (budget_left()) {
    std::ptrdiff_t pick = -1;
    for (std::size_t k = 0; k < open.size(); ++k) {
      const auto& c = open[k];
      if (c.best.feature < 0 || !(c.best.gain > 0.0)) continue;
      if (pick < 0 || c.best.gain > open[static_cast<std::size_t>(pick)].best.gain ||
          (c.best.gain == open[static_cast<std::size_t>(pick)].best.gain &&
           c.node_index < open[static_cast<std::size_t>(pick)].node_index))
        pick = static_cast<std::ptrdiff_t>(k);
    }
    if (pick < 0) break;
    GrowNode node = std::move(open[static_cast<std::size_t>(pick)]);
    open.erase(open.begin() + pick);
    std::vector<GrowNode> children;
    split_node(node, children);
    for (auto& child : children) {
      if (can_split(child)) child.best = find_best_split(X, grad, hess, child, params);
      open.push_back(std::move(child));
    }
  }
  for (const auto& node : open) finalize_leaf(node);
  return tree;
}

}  // namespace detail

inline void check_finite(const EmbeddingMatrix& X) {
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (const double v : X.row(i))
      if (!std::isfinite(v)) throw NonFiniteInput("non-finite feature in row '" + X.ids[i] + "'");
}

// Newton boosting on the (weighted) logistic loss:
//   g_i = w_i (p_i - y_i),  h_i = w_i p_i (1 - p_i),  leaf = -G / (H + lambda).
inline TreeEnsemble train_boosted(const EmbeddingMatrix& X, std::span<const int> y,
                                  std::optional<std::span<const double>> weights,
                                  const BoostParams& params) {
  params.validate();
  if (X.rows() != y.size())
    throw ShapeError("feature rows (" + std::to_string(X.rows()) + ") != labels (" +
                     std::to_string(y.size()) + ")");
  if (X.rows() == 0) throw EmptyDataset("cannot train on zero examples");
  if (X.values.size() != X.rows() * X.dim) throw ShapeError("embedding matrix storage is inconsistent");
  if (weights && weights->size() != y.size())
    throw ShapeError("weights (" + std::to_string(weights->size()) + ") != labels (" +
                     std::to_string(y.size()) + ")");
  check_finite(X);
  for (const int label : y)
    if (label != 0 && label != 1) throw ShapeError("labels must be 0 or 1");
  if (weights)
    for (const double w : *weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw NonFiniteInput("example weights must be positive and finite");

  TreeEnsemble model;
  model.base_score = 0.0;
  model.learning_rate = params.learning_rate;
  model.feature_dim = X.dim;
  model.params = params;

  const std::size_t n = X.rows();
  std::vector<double> logits(n, model.base_score), grad(n), hess(n);
  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(logits[i]);
      const double w = weights ? (*weights)[i] : 1.0;
      grad[i] = w * (p - static_cast<double>(y[i]));
      hess[i] = w * p * (1.0 - p);
    }
    RegressionTree tree = detail::grow_tree(X, grad, hess, params);
    for (std::size_t i = 0; i < n; ++i) logits[i] += model.learning_rate * tree.predict(X.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline std::vector<double> predict_logits(const TreeEnsemble& model, const EmbeddingMatrix& X) {
  if (X.dim != model.feature_dim)
    throw ShapeError("feature dimension " + std::to_string(X.dim) + " != model dimension " +
                     std::to_string(model.feature_dim));
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = model.logit(X.row(i));
  return out;
}

inline std::vector<double> predict_proba(const TreeEnsemble& model, const EmbeddingMatrix& X) {
  auto out = predict_logits(model, X);
  for (double& z : out) z = sigmoid(z);
  return out;
}

// Mean weighted logistic loss of raw logits.
inline double weighted_logloss(std::span<const double> logits, std::span<const int> y,
                               std::optional<std::span<const double>> weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    // log(1 + e^z) - y z, evaluated stably.
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    const double loss = softplus - static_cast<double>(y[i]) * z;
    total += (weights ? (*weights)[i] : 1.0) * loss;
  }
  return logits.empty() ? 0.0 : total / static_cast<double>(logits.size());
}

inline nlohmann::json to_json(const TreeEnsemble& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json splits = nlohmann::json::array();
    nlohmann::json leaves = nlohmann::json::array();
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      const auto& n = tree.nodes[k];
      if (n.is_leaf()) {
        leaves.push_back({{"node", k}, {"value", n.value}});
      } else {
        splits.push_back({{"node", k},
                          {"feature", n.feature},
                          {"threshold", n.threshold},
                          {"gain", n.gain},
                          {"left", n.left},
                          {"right", n.right}});
      }
    }
    trees.push_back({{"splits", std::move(splits)}, {"leaves", std::move(leaves)}});
  }
  return {{"version", TreeEnsemble::kFormatVersion},
          {"params", model.params},
          {"base_score", model.base_score},
          {"learning_rate", model.learning_rate},
          {"feature_dim", model.feature_dim},
          {"trees", std::move(trees)}};
}

inline TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != TreeEnsemble::kFormatVersion)
      throw DataError("unsupported tree ensemble version " + j.at("version").dump());
    TreeEnsemble model;
    model.params = j.at("params").get<BoostParams>();
    j.at("base_score").get_to(model.base_score);
    j.at("learning_rate").get_to(model.learning_rate);
    j.at("feature_dim").get_to(model.feature_dim);
    for (const auto& jt : j.at("trees")) {
      RegressionTree tree;
      const std::size_t n_nodes = jt.at("splits").size() + jt.at("leaves").size();
      tree.nodes.resize(n_nodes);
      std::vector<char> seen(n_nodes, 0);
      auto claim = [&](std::size_t k) -> TreeNode& {
        if (k >= n_nodes || seen[k]) throw DataError("tree node index out of range or repeated");
        seen[k] = 1;
        return tree.nodes[k];
      };
      for (const auto& js : jt.at("splits")) {
        const auto k = js.at("node").get<std::size_t>();
        auto& node = claim(k);
        js.at("feature").get_to(node.feature);
        js.at("threshold").get_to(node.threshold);
        js.at("gain").get_to(node.gain);
        js.at("left").get_to(node.left);
        js.at("right").get_to(node.right);
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= model.feature_dim)
          throw DataError("split feature index out of range");
        if (node.left <= static_cast<int>(k) || node.right <= static_cast<int>(k) ||
            static_cast<std::size_t>(node.left) >= n_nodes ||
            static_cast<std::size_t>(node.right) >= n_nodes)
          throw DataError("split child index out of range");
      }
      for (const auto& jl : jt.at("leaves")) {
        auto& node = claim(jl.at("node").get<std::size_t>());
        node.feature = -1;
        jl.at("value").get_to(node.value);
        if (!std::isfinite(node.value)) throw DataError("non-finite leaf value");
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed tree ensemble: ") + e.what());
  }
}

}  // namespace harmclf
