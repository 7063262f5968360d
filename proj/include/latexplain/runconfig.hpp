#pragma once

#include "latexplain/aae.hpp"
#include "latexplain/common.hpp"
#include "latexplain/explain.hpp"
#include "latexplain/eval.hpp"
#include "latexplain/mlp.hpp"
#include "latexplain/neighgen.hpp"
#include "latexplain/surrogate.hpp"

#include <map>
#include <string>
#include <vector>

namespace latexplain {

// Flat "section.key = value" text format, '#' starts a comment. Keys are
// unique; serialization emits them sorted so parse -> serialize -> parse is
// the identity.
struct KeyValueConfig {
  std::map<std::string, std::string> values;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);
  std::string serialize() const;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<Eigen::Index> get_dims(const std::string& key,
                                     const std::vector<Eigen::Index>& fallback) const;

  bool operator==(const KeyValueConfig&) const = default;
};

// Everything a pipeline run needs: dataset, split, training, neighborhood,
// surrogate, explanation and evaluation parameters. Sub-seeds are derived
// from the global seed per component name.
struct RunConfig {
  std::string dataset_path;
  std::string out_dir = "out";
  std::uint64_t seed = 7;
  double train_fraction = 0.8;

  std::vector<Eigen::Index> bb_hidden{128, 64};
  TrainConfig bb_train;

  AaeTrainConfig aae;
  std::string bb_checkpoint;   // defaults to <out>/blackbox.mlp
  std::string aae_checkpoint;  // defaults to <out>/aae.bin

  GenConfig neighborhood;
  TreeConfig tree;
  int num_exemplars = 10;
  int num_counter_exemplars = 2;
  int exemplar_budget = 4000;

  int eval_instances = 50;
  int knn_test_size = 500;
  int knn_sources = 20;
  RobustnessConfig robustness;

  // External oracle; when set the black box is the external command instead
  // of the built-in checkpoint.
  std::string oracle_command;
  int oracle_classes = 10;

  static RunConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;

  ExplainConfig explain_config(std::uint64_t instance_seed) const;
};

}  // namespace latexplain
