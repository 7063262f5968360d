#include "latexplain/runconfig.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace latexplain {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string dims_to_string(const std::vector<Eigen::Index>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(dims[i]);
  }
  return out;
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer: " + name);
}

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(line_no) + ": empty key");
    cfg.values[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [key, value] : values) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing required config key: " + key);
  return it->second;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    std::size_t pos = 0;
    const long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: " + it->second);
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: " + it->second);
  }
}

std::vector<Eigen::Index> KeyValueConfig::get_dims(
    const std::string& key, const std::vector<Eigen::Index>& fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  std::vector<Eigen::Index> dims;
  std::istringstream in(it->second);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      dims.push_back(std::stol(trim(part)));
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": bad dimension list: " + it->second);
    }
  }
  if (dims.empty()) throw ConfigError("config key " + key + ": empty dimension list");
  return dims;
}

RunConfig RunConfig::from_kv(const KeyValueConfig& kv) {
  RunConfig cfg;
  cfg.dataset_path = kv.get_string("data.dataset", "");
  cfg.out_dir = kv.get_string("out", cfg.out_dir);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 7));
  cfg.train_fraction = kv.get_double("split.train_fraction", cfg.train_fraction);
  if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0)
    throw ConfigError("split.train_fraction must lie in (0,1)");

  cfg.bb_hidden = kv.get_dims("bb.hidden", cfg.bb_hidden);
  cfg.bb_train.learning_rate = kv.get_double("bb.learning_rate", 1e-3);
  cfg.bb_train.epochs = static_cast<int>(kv.get_int("bb.epochs", 12));
  cfg.bb_train.batch_size = static_cast<int>(kv.get_int("bb.batch_size", 64));
  cfg.bb_train.optimizer = parse_optimizer(kv.get_string("bb.optimizer", "adam"));

  cfg.aae.k = kv.get_int("aae.k", 4);
  cfg.aae.validity_threshold = kv.get_double("aae.validity_threshold", 0.5);
  if (cfg.aae.validity_threshold <= 0.0 || cfg.aae.validity_threshold >= 1.0)
    throw ConfigError("aae.validity_threshold must lie in (0,1)");
  cfg.aae.enc_hidden = kv.get_dims("aae.enc_hidden", cfg.aae.enc_hidden);
  cfg.aae.dec_hidden = kv.get_dims("aae.dec_hidden", cfg.aae.dec_hidden);
  cfg.aae.disc_hidden = kv.get_dims("aae.disc_hidden", cfg.aae.disc_hidden);
  cfg.aae.recon_cfg.learning_rate = kv.get_double("aae.recon_lr", 1e-3);
  cfg.aae.recon_cfg.epochs = static_cast<int>(kv.get_int("aae.epochs", 30));
  cfg.aae.recon_cfg.batch_size = static_cast<int>(kv.get_int("aae.batch_size", 64));
  cfg.aae.reg_cfg.learning_rate = kv.get_double("aae.reg_lr", 5e-4);
  cfg.aae.reg_cfg.batch_size = cfg.aae.recon_cfg.batch_size;

  cfg.bb_checkpoint = kv.get_string("bb.checkpoint", "");
  cfg.aae_checkpoint = kv.get_string("aae.checkpoint", "");

  cfg.neighborhood.n_total = static_cast<int>(kv.get_int("neigh.size", 300));
  cfg.neighborhood.balance = kv.get_double("neigh.balance", 0.5);
  cfg.neighborhood.population = static_cast<int>(kv.get_int("neigh.population", 100));
  cfg.neighborhood.generations = static_cast<int>(kv.get_int("neigh.generations", 20));
  cfg.neighborhood.crossover_prob = kv.get_double("neigh.crossover_prob", 0.5);
  cfg.neighborhood.mutation_prob = kv.get_double("neigh.mutation_prob", 0.2);
  cfg.neighborhood.mutation_sigma = kv.get_double("neigh.mutation_sigma", 0.5);
  cfg.neighborhood.validity_threshold = cfg.aae.validity_threshold;
  if (cfg.neighborhood.crossover_prob < 0.0 || cfg.neighborhood.crossover_prob > 1.0 ||
      cfg.neighborhood.mutation_prob < 0.0 || cfg.neighborhood.mutation_prob > 1.0)
    throw ConfigError("neigh probabilities must lie in [0,1]");
  if (cfg.neighborhood.mutation_sigma <= 0.0)
    throw ConfigError("neigh.mutation_sigma must be positive");

  cfg.tree.max_depth = static_cast<int>(kv.get_int("tree.max_depth", 8));
  cfg.tree.min_leaf = static_cast<int>(kv.get_int("tree.min_leaf", 2));

  cfg.num_exemplars = static_cast<int>(kv.get_int("explain.num_exemplars", 10));
  cfg.num_counter_exemplars =
      static_cast<int>(kv.get_int("explain.num_counter_exemplars", 2));
  cfg.exemplar_budget = static_cast<int>(kv.get_int("explain.budget", 4000));

  cfg.eval_instances = static_cast<int>(kv.get_int("eval.instances", 50));
  cfg.knn_test_size = static_cast<int>(kv.get_int("eval.knn_test_size", 500));
  cfg.knn_sources = static_cast<int>(kv.get_int("eval.knn_sources", 20));
  cfg.robustness.epsilon = kv.get_double("eval.epsilon", 0.1);
  cfg.robustness.noise_rate = kv.get_double("eval.noise_rate", 0.05);
  cfg.robustness.replicas = static_cast<int>(kv.get_int("eval.replicas", 5));
  cfg.robustness.retries = static_cast<int>(kv.get_int("eval.retries", 20));
  if (cfg.robustness.epsilon <= 0.0) throw ConfigError("eval.epsilon must be positive");
  if (cfg.robustness.noise_rate <= 0.0 || cfg.robustness.noise_rate >= 1.0)
    throw ConfigError("eval.noise_rate must lie in (0,1)");

  cfg.oracle_command = kv.get_string("oracle.command", "");
  cfg.oracle_classes = static_cast<int>(kv.get_int("oracle.classes", 10));
  return cfg;
}

KeyValueConfig RunConfig::to_kv() const {
  KeyValueConfig kv;
  auto set = [&kv](const std::string& key, const std::string& value) {
    kv.values[key] = value;
  };
  set("data.dataset", dataset_path);
  set("out", out_dir);
  set("seed", std::to_string(seed));
  set("split.train_fraction", format_double(train_fraction));
  set("bb.hidden", dims_to_string(bb_hidden));
  set("bb.learning_rate", format_double(bb_train.learning_rate));
  set("bb.epochs", std::to_string(bb_train.epochs));
  set("bb.batch_size", std::to_string(bb_train.batch_size));
  set("bb.optimizer", optimizer_name(bb_train.optimizer));
  set("aae.k", std::to_string(aae.k));
  set("aae.validity_threshold", format_double(aae.validity_threshold));
  set("aae.enc_hidden", dims_to_string(aae.enc_hidden));
  set("aae.dec_hidden", dims_to_string(aae.dec_hidden));
  set("aae.disc_hidden", dims_to_string(aae.disc_hidden));
  set("aae.recon_lr", format_double(aae.recon_cfg.learning_rate));
  set("aae.epochs", std::to_string(aae.recon_cfg.epochs));
  set("aae.batch_size", std::to_string(aae.recon_cfg.batch_size));
  set("aae.reg_lr", format_double(aae.reg_cfg.learning_rate));
  if (!bb_checkpoint.empty()) set("bb.checkpoint", bb_checkpoint);
  if (!aae_checkpoint.empty()) set("aae.checkpoint", aae_checkpoint);
  set("neigh.size", std::to_string(neighborhood.n_total));
  set("neigh.balance", format_double(neighborhood.balance));
  set("neigh.population", std::to_string(neighborhood.population));
  set("neigh.generations", std::to_string(neighborhood.generations));
  set("neigh.crossover_prob", format_double(neighborhood.crossover_prob));
  set("neigh.mutation_prob", format_double(neighborhood.mutation_prob));
  set("neigh.mutation_sigma", format_double(neighborhood.mutation_sigma));
  set("tree.max_depth", std::to_string(tree.max_depth));
  set("tree.min_leaf", std::to_string(tree.min_leaf));
  set("explain.num_exemplars", std::to_string(num_exemplars));
  set("explain.num_counter_exemplars", std::to_string(num_counter_exemplars));
  set("explain.budget", std::to_string(exemplar_budget));
  set("eval.instances", std::to_string(eval_instances));
  set("eval.knn_test_size", std::to_string(knn_test_size));
  set("eval.knn_sources", std::to_string(knn_sources));
  set("eval.epsilon", format_double(robustness.epsilon));
  set("eval.noise_rate", format_double(robustness.noise_rate));
  set("eval.replicas", std::to_string(robustness.replicas));
  set("eval.retries", std::to_string(robustness.retries));
  if (!oracle_command.empty()) {
    set("oracle.command", oracle_command);
    set("oracle.classes", std::to_string(oracle_classes));
  }
  return kv;
}

ExplainConfig RunConfig::explain_config(std::uint64_t instance_seed) const {
  ExplainConfig out;
  out.neighborhood = neighborhood;
  out.tree = tree;
  out.num_exemplars = num_exemplars;
  out.num_counter_exemplars = num_counter_exemplars;
  out.exemplar_budget = exemplar_budget;
  out.seed = instance_seed;
  return out;
}

}  // namespace latexplain
