// Test-side oracles for the surrogate module: a random tree generator with
// properly nested thresholds, and an independent exhaustive enumeration of
// minimal counterfactual paths. Kept out of the library on purpose so the
// checks stay independent of the implementation they verify.
#pragma once

#include "latexplain/surrogate.hpp"

#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace latexplain::testsupport {

inline int random_subtree(DecisionTree& tree, std::mt19937_64& rng, int depth, int max_depth,
                          std::vector<double> lo, std::vector<double> hi, int num_classes) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool make_leaf = depth >= max_depth || unit(rng) < 0.25 + 0.15 * depth;
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (make_leaf) {
    std::uniform_int_distribution<int> pick_label(0, num_classes - 1);
    tree.nodes[static_cast<std::size_t>(id)].label = pick_label(rng);
    tree.nodes[static_cast<std::size_t>(id)].class_counts.assign(
        static_cast<std::size_t>(num_classes), 0);
    tree.nodes[static_cast<std::size_t>(id)]
        .class_counts[static_cast<std::size_t>(tree.nodes[static_cast<std::size_t>(id)].label)] = 1;
    return id;
  }
  std::uniform_int_distribution<int> pick_feature(0, tree.num_features - 1);
  const int f = pick_feature(rng);
  const double t = lo[static_cast<std::size_t>(f)] +
                   unit(rng) * (hi[static_cast<std::size_t>(f)] - lo[static_cast<std::size_t>(f)]);
  tree.nodes[static_cast<std::size_t>(id)].leaf = false;
  tree.nodes[static_cast<std::size_t>(id)].feature = f;
  tree.nodes[static_cast<std::size_t>(id)].threshold = t;
  auto left_hi = hi;
  left_hi[static_cast<std::size_t>(f)] = t;
  const int left = random_subtree(tree, rng, depth + 1, max_depth, lo, left_hi, num_classes);
  tree.nodes[static_cast<std::size_t>(id)].left = left;
  auto right_lo = lo;
  right_lo[static_cast<std::size_t>(f)] = t;
  const int right = random_subtree(tree, rng, depth + 1, max_depth, right_lo, hi, num_classes);
  tree.nodes[static_cast<std::size_t>(id)].right = right;
  return id;
}

// Random binary tree over [-4,4]^k with nested split thresholds, as a fitted
// CART would produce. May be single-class by chance; callers filter.
inline DecisionTree random_tree(std::mt19937_64& rng, int num_features, int num_classes,
                                int max_depth) {
  DecisionTree tree;
  tree.num_features = num_features;
  tree.num_classes = num_classes;
  random_subtree(tree, rng, 0, max_depth, std::vector<double>(num_features, -4.0),
                 std::vector<double>(num_features, 4.0), num_classes);
  std::set<Label> seen;
  for (const TreeNode& n : tree.nodes)
    if (n.leaf) seen.insert(n.label);
  tree.single_class = seen.size() <= 1;
  return tree;
}

struct OraclePath {
  std::map<int, double> lower;  // feature -> strict lower bound
  std::map<int, double> upper;  // feature -> inclusive upper bound
  Label label = 0;
};

inline void oracle_paths(const DecisionTree& tree, int node, OraclePath cur,
                         std::vector<OraclePath>& out) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.leaf) {
    cur.label = n.label;
    out.push_back(std::move(cur));
    return;
  }
  OraclePath left = cur;
  auto it = left.upper.find(n.feature);
  if (it == left.upper.end() || n.threshold < it->second) left.upper[n.feature] = n.threshold;
  oracle_paths(tree, n.left, std::move(left), out);
  OraclePath right = std::move(cur);
  auto jt = right.lower.find(n.feature);
  if (jt == right.lower.end() || n.threshold > jt->second) right.lower[n.feature] = n.threshold;
  oracle_paths(tree, n.right, std::move(right), out);
}

inline int oracle_violations(const OraclePath& path, const LatentPoint& z) {
  int count = 0;
  for (const auto& [f, lo] : path.lower)
    if (!(z(f) > lo)) ++count;
  for (const auto& [f, hi] : path.upper)
    if (!(z(f) <= hi)) ++count;
  return count;
}

struct OracleCounterfactuals {
  int min_falsified = std::numeric_limits<int>::max();
  // Canonical signature per kept path: label plus sorted interval bounds.
  std::set<std::pair<Label, std::vector<std::tuple<int, int, double>>>> rules;
};

// Exhaustive scan: every opposite-label leaf path, violation counts against
// z, keep the minimum set.
inline OracleCounterfactuals oracle_counterfactuals(const DecisionTree& tree,
                                                    const LatentPoint& z, Label rule_label) {
  std::vector<OraclePath> paths;
  oracle_paths(tree, 0, {}, paths);
  OracleCounterfactuals result;
  for (const OraclePath& p : paths) {
    if (p.label == rule_label) continue;
    result.min_falsified = std::min(result.min_falsified, oracle_violations(p, z));
  }
  for (const OraclePath& p : paths) {
    if (p.label == rule_label) continue;
    if (oracle_violations(p, z) != result.min_falsified) continue;
    std::vector<std::tuple<int, int, double>> signature;
    for (const auto& [f, lo] : p.lower) signature.emplace_back(f, 0, lo);
    for (const auto& [f, hi] : p.upper) signature.emplace_back(f, 1, hi);
    std::sort(signature.begin(), signature.end());
    result.rules.insert({p.label, std::move(signature)});
  }
  return result;
}

// The same signature form for rules coming out of the implementation.
inline std::pair<Label, std::vector<std::tuple<int, int, double>>> rule_signature(
    const CounterfactualRule& cf) {
  std::vector<std::tuple<int, int, double>> signature;
  for (const SplitCondition& c : cf.premise)
    signature.emplace_back(c.feature, c.op == SplitCondition::Op::gt ? 0 : 1, c.threshold);
  std::sort(signature.begin(), signature.end());
  return {cf.label, std::move(signature)};
}

}  // namespace latexplain::testsupport
