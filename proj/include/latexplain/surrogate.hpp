#pragma once

#include "latexplain/common.hpp"
#include "latexplain/neighgen.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace latexplain {

// Binary CART node stored in an arena; value <= threshold routes left.
struct TreeNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Label label = 0;
  std::vector<long> class_counts;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at index 0
  int num_features = 0;
  int num_classes = 0;
  bool single_class = false;  // fit saw only one label (depth-0 tree)
};

struct TreeConfig {
  int max_depth = 8;
  int min_leaf = 2;
  std::uint64_t seed = 0;
};

struct SplitCondition {
  enum class Op { leq, gt };
  int feature = 0;
  Op op = Op::leq;
  double threshold = 0.0;
};

// Conjunction of split conditions with a consequent label. Premises are kept
// canonicalized: at most one lower (>) and one upper (<=) bound per feature.
struct DecisionRule {
  std::vector<SplitCondition> premise;
  Label label = 0;
};

struct CounterfactualRule {
  std::vector<SplitCondition> premise;
  Label label = 0;
  int falsified_count = 0;  // canonicalized conditions of the premise that z fails
};

// Gini CART: split thresholds are midpoints of consecutive distinct sorted
// feature values; the split maximizing impurity decrease wins, ties broken
// by lower feature index then lower threshold. Stops on max_depth, min_leaf
// or purity. Leaf label ties break toward the lower class index.
DecisionTree fit_tree(const Matrix& points, const std::vector<Label>& labels,
                      const TreeConfig& config);
DecisionTree fit_tree(const Neighborhood& neighborhood, const TreeConfig& config);

Label predict(const DecisionTree& tree, const LatentPoint& h);

bool satisfies(const std::vector<SplitCondition>& premise, const LatentPoint& h);

// Tightest interval per feature, ordered by feature index (lower bound
// before upper bound). Throws GenerationError on a contradictory premise.
std::vector<SplitCondition> canonicalize(const std::vector<SplitCondition>& premise);

// Conjunction of the split conditions on the root-to-leaf path satisfied by
// z, canonicalized, with the leaf label.
DecisionRule extract_rule(const DecisionTree& tree, const LatentPoint& z);

// All opposite-label leaf paths minimizing the number of canonicalized
// conditions falsified by z. Empty when the tree is single-class.
std::vector<CounterfactualRule> extract_counterfactuals(const DecisionTree& tree,
                                                        const LatentPoint& z,
                                                        const DecisionRule& rule);

nlohmann::json tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& doc);

nlohmann::json conditions_to_json(const std::vector<SplitCondition>& premise);
std::vector<SplitCondition> conditions_from_json(const nlohmann::json& doc);

std::string condition_to_string(const SplitCondition& c);

}  // namespace latexplain
