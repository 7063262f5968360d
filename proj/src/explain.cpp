#include "latexplain/explain.hpp"

#include "latexplain/dataset.hpp"
#include "latexplain/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

namespace latexplain {

namespace {

constexpr double kPriorTruncation = 3.0;  // +-3 sigma of the standard normal prior

struct FeasibleBox {
  Vector lower;
  Vector upper;
};

// Premise bounds win; a side the premise leaves open is truncated at the
// prior window, pushed outward when the bounded side already exceeds it.
FeasibleBox feasible_box(const std::vector<SplitCondition>& premise, Eigen::Index k) {
  FeasibleBox box;
  box.lower = Vector::Constant(k, -kPriorTruncation);
  box.upper = Vector::Constant(k, kPriorTruncation);
  std::vector<bool> has_lower(static_cast<std::size_t>(k), false);
  std::vector<bool> has_upper(static_cast<std::size_t>(k), false);
  for (const SplitCondition& c : premise) {
    if (c.feature < 0 || c.feature >= k)
      throw ShapeError("premise feature " + std::to_string(c.feature) + " outside latent dim");
    if (c.op == SplitCondition::Op::gt) {
      box.lower(c.feature) =
          has_lower[c.feature] ? std::max(box.lower(c.feature), c.threshold) : c.threshold;
      has_lower[c.feature] = true;
    } else {
      box.upper(c.feature) =
          has_upper[c.feature] ? std::min(box.upper(c.feature), c.threshold) : c.threshold;
      has_upper[c.feature] = true;
    }
  }
  for (Eigen::Index f = 0; f < k; ++f) {
    if (has_lower[f] && has_upper[f]) {
      if (box.lower(f) >= box.upper(f))
        throw GenerationError("unsatisfiable premise on feature " + std::to_string(f));
    } else if (has_lower[f] && !has_upper[f]) {
      box.upper(f) = std::max(kPriorTruncation, box.lower(f) + 2.0 * kPriorTruncation);
    } else if (!has_lower[f] && has_upper[f]) {
      box.lower(f) = std::min(-kPriorTruncation, box.upper(f) - 2.0 * kPriorTruncation);
    }
  }
  return box;
}

std::vector<GeneratedExemplar> sample_rule_box(const std::vector<SplitCondition>& premise,
                                               Label required_label, const AaeModel& aae,
                                               const BlackBox& bb, int count, int budget,
                                               double validity_threshold, std::uint64_t seed,
                                               long* drawn, long* passed_disde,
                                               long* passed_label) {
  const FeasibleBox box = feasible_box(premise, aae.k);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GeneratedExemplar> kept;
  const int chunk_size = 64;
  long spent = 0;
  while (static_cast<int>(kept.size()) < count && spent < budget) {
    const int chunk = static_cast<int>(std::min<long>(chunk_size, budget - spent));
    spent += chunk;
    Matrix latents(chunk, aae.k);
    for (int i = 0; i < chunk; ++i)
      for (Eigen::Index f = 0; f < aae.k; ++f)
        latents(i, f) = box.lower(f) + unit(rng) * (box.upper(f) - box.lower(f));
    const Vector scores = discriminate_batch(aae, latents);
    const Matrix images = decode_batch(aae, latents);
    const std::vector<Label> labels = classify(bb, images);
    for (int i = 0; i < chunk && static_cast<int>(kept.size()) < count; ++i) {
      if (scores(i) < validity_threshold) continue;
      if (passed_disde) ++*passed_disde;
      if (labels[static_cast<std::size_t>(i)] != required_label) continue;
      if (passed_label) ++*passed_label;
      GeneratedExemplar ex;
      ex.latent = latents.row(i).transpose();
      ex.image = images.row(i).transpose();
      ex.label = labels[static_cast<std::size_t>(i)];
      ex.score = scores(i);
      kept.push_back(std::move(ex));
    }
  }
  if (drawn) *drawn += spent;
  return kept;
}

void write_saliency_csv(const std::string& path, const Vector& saliency, int rows, int cols) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  char buf[64];
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", saliency(static_cast<Eigen::Index>(r) * cols + c));
      out << buf;
      if (c + 1 < cols) out << ",";
    }
    out << "\n";
  }
}

}  // namespace

std::vector<GeneratedExemplar> generate_exemplars(const DecisionRule& rule,
                                                  Label required_label,
                                                  const AaeModel& aae, const BlackBox& bb,
                                                  const ExemplarConfig& cfg) {
  long drawn = 0, passed_disde = 0, passed_label = 0;
  std::vector<GeneratedExemplar> kept =
      sample_rule_box(rule.premise, required_label, aae, bb, cfg.count, cfg.budget,
                      cfg.validity_threshold, cfg.seed, &drawn, &passed_disde, &passed_label);
  if (kept.empty())
    throw GenerationError(
        "exemplar generation exhausted: " + std::to_string(drawn) + " draws, " +
        std::to_string(passed_disde) + " past validity, " + std::to_string(passed_label) +
        " with label " + std::to_string(required_label));
  return kept;
}

std::vector<GeneratedExemplar> generate_exemplars(const DecisionRule& rule,
                                                  const AaeModel& aae, const BlackBox& bb,
                                                  const ExemplarConfig& cfg) {
  return generate_exemplars(rule, rule.label, aae, bb, cfg);
}

std::vector<GeneratedExemplar> generate_counter_exemplars(
    const std::vector<CounterfactualRule>& counterfactuals, const AaeModel& aae,
    const BlackBox& bb, int count_per_rule, int budget, double validity_threshold,
    std::uint64_t seed) {
  if (counterfactuals.empty())
    throw GenerationError("counter-exemplar generation needs at least one counterfactual rule");
  std::vector<std::vector<GeneratedExemplar>> per_rule;
  long drawn = 0, passed_disde = 0, passed_label = 0;
  for (std::size_t r = 0; r < counterfactuals.size(); ++r) {
    const CounterfactualRule& cf = counterfactuals[r];
    per_rule.push_back(sample_rule_box(
        cf.premise, cf.label, aae, bb, count_per_rule, budget, validity_threshold,
        derive_seed(seed, "counter/" + std::to_string(r)), &drawn, &passed_disde,
        &passed_label));
  }
  // Round-robin across rules so a truncated result still shows variety.
  std::vector<GeneratedExemplar> merged;
  for (int round = 0; round < count_per_rule; ++round)
    for (auto& rule_list : per_rule)
      if (round < static_cast<int>(rule_list.size()))
        merged.push_back(std::move(rule_list[static_cast<std::size_t>(round)]));
  if (merged.empty())
    throw GenerationError(
        "counter-exemplar generation exhausted over " +
        std::to_string(counterfactuals.size()) + " rules: " + std::to_string(drawn) +
        " draws, " + std::to_string(passed_disde) + " past validity, " +
        std::to_string(passed_label) + " with the counterfactual label");
  return merged;
}

Vector saliency_map(const Image& x, const std::vector<Image>& exemplars) {
  if (exemplars.empty()) throw GenerationError("saliency_map: no exemplars");
  for (const Image& e : exemplars)
    if (e.size() != x.size()) throw ShapeError("saliency_map: exemplar pixel count mismatch");
  const std::size_t m = exemplars.size();
  Vector s(x.size());
  std::vector<double> diffs(m);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (std::size_t e = 0; e < m; ++e) diffs[e] = x(i) - exemplars[e](i);
    const std::size_t mid = m / 2;
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(mid), diffs.end());
    if (m % 2 == 1) {
      s(i) = diffs[mid];
    } else {
      const double hi = diffs[mid];
      const double lo = *std::max_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(mid));
      s(i) = (lo + hi) / 2.0;
    }
  }
  return s;
}

Explanation explain_instance(const Image& x, const BlackBox& bb, const AaeModel& aae,
                             const ExplainConfig& cfg) {
  Explanation e;
  e.source = x;
  try {
    e.source_label = classify_one(bb, x);
  } catch (const Error& err) {
    throw GenerationError(std::string("explain[classify]: ") + err.what());
  }

  LatentPoint z;
  try {
    z = encode(aae, x, EncodeMode::mean);
  } catch (const Error& err) {
    throw GenerationError(std::string("explain[encode]: ") + err.what());
  }

  Neighborhood neigh;
  try {
    GenConfig gen_cfg = cfg.neighborhood;
    gen_cfg.seed = derive_seed(cfg.seed, "explain/neighborhood");
    neigh = generate_neighborhood(z, bb, aae, gen_cfg, e.source_label);
  } catch (const Error& err) {
    throw GenerationError(std::string("explain[neighgen]: ") + err.what());
  }
  e.degenerate_neighborhood = neigh.degenerate;

  DecisionTree tree;
  try {
    tree = fit_tree(neigh, cfg.tree);
    e.rule = extract_rule(tree, z);
    e.counterfactuals = extract_counterfactuals(tree, z, e.rule);
    e.fidelity = fidelity(neigh, tree);
  } catch (const Error& err) {
    throw GenerationError(std::string("explain[surrogate]: ") + err.what());
  }
  e.label_drift = e.rule.label != e.source_label;

  try {
    ExemplarConfig ex_cfg;
    ex_cfg.count = cfg.num_exemplars;
    ex_cfg.budget = cfg.exemplar_budget;
    ex_cfg.validity_threshold = cfg.neighborhood.validity_threshold;
    ex_cfg.seed = derive_seed(cfg.seed, "explain/exemplars");
    // The explanation contract is stated against b(x), so gate on the source
    // label; it coincides with rule.label whenever there is no drift.
    const auto generated = generate_exemplars(e.rule, e.source_label, aae, bb, ex_cfg);
    for (const GeneratedExemplar& g : generated) {
      e.exemplars.push_back(g.image);
      e.exemplar_latents.push_back(g.latent);
    }
  } catch (const Error& err) {
    throw GenerationError(std::string("explain[exemplars]: ") + err.what());
  }

  if (!e.counterfactuals.empty()) {
    try {
      const auto generated = generate_counter_exemplars(
          e.counterfactuals, aae, bb, cfg.num_counter_exemplars, cfg.exemplar_budget,
          cfg.neighborhood.validity_threshold, derive_seed(cfg.seed, "explain/counters"));
      for (const GeneratedExemplar& g : generated) {
        if (static_cast<int>(e.counter_exemplars.size()) >= cfg.num_counter_exemplars) break;
        e.counter_exemplars.emplace_back(g.image, g.label);
        e.counter_latents.push_back(g.latent);
      }
    } catch (const Error& err) {
      throw GenerationError(std::string("explain[counter-exemplars]: ") + err.what());
    }
  }

  try {
    e.saliency = saliency_map(x, e.exemplars);
  } catch (const Error& err) {
    throw GenerationError(std::string("explain[saliency]: ") + err.what());
  }
  return e;
}

InterpolationSequence interpolate(const LatentPoint& z, const LatentPoint& h_c,
                                  const std::vector<SplitCondition>& constraint,
                                  int steps, const AaeModel& aae, const BlackBox& bb) {
  if (steps < 2) throw ConfigError("interpolate: steps must be >= 2");
  if (z.size() != h_c.size()) throw ShapeError("interpolate: endpoint dims differ");
  InterpolationSequence seq;
  seq.from = z;
  seq.to = h_c;
  Matrix latents(steps, z.size());
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    latents.row(i) = (z + t * (h_c - z)).transpose();
  }
  const Matrix images = decode_batch(aae, latents);
  const std::vector<Label> labels = classify(bb, images);
  for (int i = 0; i < steps; ++i) {
    InterpolationStep step;
    step.latent = latents.row(i).transpose();
    step.image = images.row(i).transpose();
    step.label = labels[static_cast<std::size_t>(i)];
    step.satisfies_constraint = satisfies(constraint, step.latent);
    seq.steps.push_back(std::move(step));
  }
  return seq;
}

nlohmann::json explanation_to_json(const Explanation& e, const std::string& source_name,
                                   const std::vector<std::string>& exemplar_names,
                                   const std::vector<std::string>& counter_names,
                                   const std::string& saliency_csv_name) {
  nlohmann::json counters = nlohmann::json::array();
  for (std::size_t i = 0; i < e.counter_exemplars.size(); ++i) {
    counters.push_back({{"image", counter_names[i]},
                        {"label", e.counter_exemplars[i].second}});
  }
  nlohmann::json cfs = nlohmann::json::array();
  for (const CounterfactualRule& cf : e.counterfactuals) {
    cfs.push_back({{"premise", conditions_to_json(cf.premise)},
                   {"label", cf.label},
                   {"falsified_count", cf.falsified_count}});
  }
  std::vector<double> saliency(e.saliency.data(), e.saliency.data() + e.saliency.size());
  return nlohmann::json{
      {"source_image", source_name},
      {"source_label", e.source_label},
      {"rule", {{"premise", conditions_to_json(e.rule.premise)}, {"label", e.rule.label}}},
      {"counterfactuals", std::move(cfs)},
      {"exemplars", exemplar_names},
      {"counter_exemplars", std::move(counters)},
      {"saliency", std::move(saliency)},
      {"saliency_csv", saliency_csv_name},
      {"fidelity", e.fidelity},
      {"flags",
       {{"degenerate_neighborhood", e.degenerate_neighborhood}, {"label_drift", e.label_drift}}}};
}

nlohmann::json write_explanation(const Explanation& e, const std::string& dir,
                                 int img_rows, int img_cols) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string source_name = "source.pgm";
  write_pgm((fs::path(dir) / source_name).string(), e.source, img_rows, img_cols);

  std::vector<std::string> exemplar_names;
  for (std::size_t i = 0; i < e.exemplars.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "exemplar_%02zu.pgm", i);
    write_pgm((fs::path(dir) / name).string(), e.exemplars[i], img_rows, img_cols);
    exemplar_names.emplace_back(name);
  }
  std::vector<std::string> counter_names;
  for (std::size_t i = 0; i < e.counter_exemplars.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "counter_%02zu.pgm", i);
    write_pgm((fs::path(dir) / name).string(), e.counter_exemplars[i].first, img_rows, img_cols);
    counter_names.emplace_back(name);
  }
  const std::string saliency_csv = "saliency.csv";
  write_saliency_csv((fs::path(dir) / saliency_csv).string(), e.saliency, img_rows, img_cols);

  const nlohmann::json manifest =
      explanation_to_json(e, source_name, exemplar_names, counter_names, saliency_csv);
  std::ofstream out((fs::path(dir) / "manifest.json").string());
  if (!out) throw ParseError("cannot write manifest under " + dir);
  out << manifest.dump(2) << "\n";
  return manifest;
}

}  // namespace latexplain
