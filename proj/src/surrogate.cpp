#include "latexplain/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

namespace latexplain {

namespace {

double gini(const std::vector<long>& counts, long total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (long c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

Label majority_label(const std::vector<long>& counts) {
  Label best = 0;
  long best_count = -1;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > best_count) {  // ties keep the lower class index
      best_count = counts[c];
      best = static_cast<Label>(c);
    }
  }
  return best;
}

struct BestSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct Builder {
  const Matrix& points;
  const std::vector<Label>& labels;
  const TreeConfig& cfg;
  int num_classes;
  DecisionTree tree;

  std::vector<long> count_classes(const std::vector<int>& idx) const {
    std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
    for (int i : idx) ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    return counts;
  }

  std::optional<BestSplit> find_split(const std::vector<int>& idx,
                                      const std::vector<long>& counts) const {
    const long total = static_cast<long>(idx.size());
    const double parent_impurity = gini(counts, total);
    BestSplit best;
    std::vector<std::pair<double, Label>> column(idx.size());
    for (int f = 0; f < static_cast<int>(points.cols()); ++f) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        column[i] = {points(idx[i], f), labels[static_cast<std::size_t>(idx[i])]};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::vector<long> left(static_cast<std::size_t>(num_classes), 0);
      std::vector<long> right = counts;
      long n_left = 0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        ++left[static_cast<std::size_t>(column[i].second)];
        --right[static_cast<std::size_t>(column[i].second)];
        ++n_left;
        if (column[i].first == column[i + 1].first) continue;  // not a distinct boundary
        if (n_left < cfg.min_leaf || total - n_left < cfg.min_leaf) continue;
        const double threshold = column[i].first + 0.5 * (column[i + 1].first - column[i].first);
        const double w_left = static_cast<double>(n_left) / static_cast<double>(total);
        const double gain = parent_impurity - w_left * gini(left, n_left) -
                            (1.0 - w_left) * gini(right, total - n_left);
        // Features and thresholds are visited in ascending order, so keeping
        // the first maximum breaks ties by (lower feature, lower threshold).
        if (gain > best.gain) best = {f, threshold, gain};
      }
    }
    if (best.feature < 0 || best.gain <= 0.0) return std::nullopt;
    return best;
  }

  int build(const std::vector<int>& idx, int depth) {
    const std::vector<long> counts = count_classes(idx);
    TreeNode node;
    node.class_counts = counts;
    node.label = majority_label(counts);

    const bool pure = gini(counts, static_cast<long>(idx.size())) == 0.0;
    std::optional<BestSplit> split;
    if (!pure && depth < cfg.max_depth &&
        static_cast<long>(idx.size()) >= 2L * cfg.min_leaf)
      split = find_split(idx, counts);

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (!split) return node_id;

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
      if (points(i, split->feature) <= split->threshold)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    tree.nodes[static_cast<std::size_t>(node_id)].leaf = false;
    tree.nodes[static_cast<std::size_t>(node_id)].feature = split->feature;
    tree.nodes[static_cast<std::size_t>(node_id)].threshold = split->threshold;
    const int left_id = build(left_idx, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].left = left_id;
    const int right_id = build(right_idx, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].right = right_id;
    return node_id;
  }
};

// Path conditions as per-feature interval bounds.
struct IntervalBounds {
  std::map<int, double> lower;  // feature -> strict lower bound (from > splits)
  std::map<int, double> upper;  // feature -> inclusive upper bound (from <= splits)
};

IntervalBounds to_bounds(const std::vector<SplitCondition>& premise) {
  IntervalBounds b;
  for (const SplitCondition& c : premise) {
    if (c.op == SplitCondition::Op::gt) {
      auto it = b.lower.find(c.feature);
      if (it == b.lower.end() || c.threshold > it->second) b.lower[c.feature] = c.threshold;
    } else {
      auto it = b.upper.find(c.feature);
      if (it == b.upper.end() || c.threshold < it->second) b.upper[c.feature] = c.threshold;
    }
  }
  return b;
}

std::vector<SplitCondition> bounds_to_premise(const IntervalBounds& b) {
  std::vector<SplitCondition> premise;
  std::set<int> features;
  for (const auto& [f, v] : b.lower) features.insert(f);
  for (const auto& [f, v] : b.upper) features.insert(f);
  for (int f : features) {
    const auto lo = b.lower.find(f);
    const auto hi = b.upper.find(f);
    if (lo != b.lower.end() && hi != b.upper.end() && lo->second >= hi->second)
      throw GenerationError("premise contradiction on feature " + std::to_string(f));
    if (lo != b.lower.end())
      premise.push_back({f, SplitCondition::Op::gt, lo->second});
    if (hi != b.upper.end())
      premise.push_back({f, SplitCondition::Op::leq, hi->second});
  }
  return premise;
}

struct LeafPath {
  std::vector<SplitCondition> raw;
  Label label = 0;
};

void collect_paths(const DecisionTree& tree, int node_id,
                   std::vector<SplitCondition>& stack, std::vector<LeafPath>& out) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
  if (node.leaf) {
    out.push_back({stack, node.label});
    return;
  }
  stack.push_back({node.feature, SplitCondition::Op::leq, node.threshold});
  collect_paths(tree, node.left, stack, out);
  stack.back() = {node.feature, SplitCondition::Op::gt, node.threshold};
  collect_paths(tree, node.right, stack, out);
  stack.pop_back();
}

int count_falsified(const std::vector<SplitCondition>& canonical, const LatentPoint& z) {
  int falsified = 0;
  for (const SplitCondition& c : canonical) {
    const double v = z(c.feature);
    const bool ok = c.op == SplitCondition::Op::leq ? v <= c.threshold : v > c.threshold;
    if (!ok) ++falsified;
  }
  return falsified;
}

}  // namespace

DecisionTree fit_tree(const Matrix& points, const std::vector<Label>& labels,
                      const TreeConfig& config) {
  if (points.rows() < 2) throw ShapeError("fit_tree: need at least 2 instances");
  if (points.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("fit_tree: point and label counts differ");
  int num_classes = 0;
  for (Label l : labels) {
    if (l < 0) throw ShapeError("fit_tree: negative label");
    num_classes = std::max(num_classes, l + 1);
  }
  Builder builder{points, labels, config, num_classes, {}};
  builder.tree.num_features = static_cast<int>(points.cols());
  builder.tree.num_classes = num_classes;
  std::vector<int> idx(static_cast<std::size_t>(points.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  builder.build(idx, 0);
  const std::vector<long> root_counts = builder.tree.nodes[0].class_counts;
  builder.tree.single_class =
      std::count_if(root_counts.begin(), root_counts.end(), [](long c) { return c > 0; }) <= 1;
  return std::move(builder.tree);
}

DecisionTree fit_tree(const Neighborhood& neighborhood, const TreeConfig& config) {
  return fit_tree(neighborhood.latents, neighborhood.labels, config);
}

Label predict(const DecisionTree& tree, const LatentPoint& h) {
  if (tree.nodes.empty()) throw ShapeError("predict: empty tree");
  int node_id = 0;
  while (!tree.nodes[static_cast<std::size_t>(node_id)].leaf) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node_id = h(node.feature) <= node.threshold ? node.left : node.right;
  }
  return tree.nodes[static_cast<std::size_t>(node_id)].label;
}

bool satisfies(const std::vector<SplitCondition>& premise, const LatentPoint& h) {
  for (const SplitCondition& c : premise) {
    const double v = h(c.feature);
    const bool ok = c.op == SplitCondition::Op::leq ? v <= c.threshold : v > c.threshold;
    if (!ok) return false;
  }
  return true;
}

std::vector<SplitCondition> canonicalize(const std::vector<SplitCondition>& premise) {
  return bounds_to_premise(to_bounds(premise));
}

DecisionRule extract_rule(const DecisionTree& tree, const LatentPoint& z) {
  if (tree.nodes.empty()) throw ShapeError("extract_rule: empty tree");
  DecisionRule rule;
  std::vector<SplitCondition> raw;
  int node_id = 0;
  while (!tree.nodes[static_cast<std::size_t>(node_id)].leaf) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    if (z(node.feature) <= node.threshold) {
      raw.push_back({node.feature, SplitCondition::Op::leq, node.threshold});
      node_id = node.left;
    } else {
      raw.push_back({node.feature, SplitCondition::Op::gt, node.threshold});
      node_id = node.right;
    }
  }
  rule.premise = canonicalize(raw);
  rule.label = tree.nodes[static_cast<std::size_t>(node_id)].label;
  return rule;
}

std::vector<CounterfactualRule> extract_counterfactuals(const DecisionTree& tree,
                                                        const LatentPoint& z,
                                                        const DecisionRule& rule) {
  std::vector<LeafPath> paths;
  std::vector<SplitCondition> stack;
  collect_paths(tree, 0, stack, paths);

  std::vector<CounterfactualRule> all;
  int min_falsified = std::numeric_limits<int>::max();
  for (const LeafPath& path : paths) {
    if (path.label == rule.label) continue;
    CounterfactualRule cf;
    cf.premise = canonicalize(path.raw);
    cf.label = path.label;
    cf.falsified_count = count_falsified(cf.premise, z);
    min_falsified = std::min(min_falsified, cf.falsified_count);
    all.push_back(std::move(cf));
  }
  std::vector<CounterfactualRule> minimal;
  for (CounterfactualRule& cf : all)
    if (cf.falsified_count == min_falsified) minimal.push_back(std::move(cf));
  return minimal;
}

nlohmann::json tree_to_json(const DecisionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& node : tree.nodes) {
    nlohmann::json j;
    if (node.leaf) {
      j["kind"] = "leaf";
      j["label"] = node.label;
      j["counts"] = node.class_counts;
    } else {
      j["kind"] = "split";
      j["feature"] = node.feature;
      j["threshold"] = node.threshold;
      j["left"] = node.left;
      j["right"] = node.right;
      j["label"] = node.label;
      j["counts"] = node.class_counts;
    }
    nodes.push_back(std::move(j));
  }
  return nlohmann::json{{"num_features", tree.num_features},
                        {"num_classes", tree.num_classes},
                        {"single_class", tree.single_class},
                        {"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const nlohmann::json& doc) {
  DecisionTree tree;
  tree.num_features = doc.at("num_features").get<int>();
  tree.num_classes = doc.at("num_classes").get<int>();
  tree.single_class = doc.at("single_class").get<bool>();
  for (const auto& j : doc.at("nodes")) {
    TreeNode node;
    node.label = j.at("label").get<Label>();
    node.class_counts = j.at("counts").get<std::vector<long>>();
    if (j.at("kind") == "split") {
      node.leaf = false;
      node.feature = j.at("feature").get<int>();
      node.threshold = j.at("threshold").get<double>();
      node.left = j.at("left").get<int>();
      node.right = j.at("right").get<int>();
    }
    tree.nodes.push_back(std::move(node));
  }
  return tree;
}

nlohmann::json conditions_to_json(const std::vector<SplitCondition>& premise) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SplitCondition& c : premise) {
    arr.push_back({{"feature", c.feature},
                   {"op", c.op == SplitCondition::Op::leq ? "<=" : ">"},
                   {"threshold", c.threshold}});
  }
  return arr;
}

std::vector<SplitCondition> conditions_from_json(const nlohmann::json& doc) {
  std::vector<SplitCondition> premise;
  for (const auto& j : doc) {
    SplitCondition c;
    c.feature = j.at("feature").get<int>();
    c.op = j.at("op").get<std::string>() == "<=" ? SplitCondition::Op::leq
                                                 : SplitCondition::Op::gt;
    c.threshold = j.at("threshold").get<double>();
    premise.push_back(c);
  }
  return premise;
}

std::string condition_to_string(const SplitCondition& c) {
  std::ostringstream os;
  os << "z" << c.feature << (c.op == SplitCondition::Op::leq ? " <= " : " > ") << c.threshold;
  return os.str();
}

}  // namespace latexplain
