#pragma once

#include "latexplain/aae.hpp"
#include "latexplain/blackbox.hpp"
#include "latexplain/common.hpp"
#include "latexplain/neighgen.hpp"
#include "latexplain/surrogate.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace latexplain {

// The explanation triple: exemplars, counter-exemplars and a signed saliency
// map, plus the latent rule and counterfactual rules they were derived from.
struct Explanation {
  Image source;
  Label source_label = 0;
  std::vector<Image> exemplars;                       // black-box label == source_label
  std::vector<LatentPoint> exemplar_latents;
  std::vector<std::pair<Image, Label>> counter_exemplars;  // label != source_label
  std::vector<LatentPoint> counter_latents;
  Vector saliency;  // n signed reals, s[i] = median(x[i] - exemplar[i])
  DecisionRule rule;
  std::vector<CounterfactualRule> counterfactuals;
  double fidelity = 0.0;
  bool degenerate_neighborhood = false;  // single-class neighborhood, no counterfactuals
  bool label_drift = false;              // surrogate leaf label differed from b(x)
};

struct ExemplarConfig {
  int count = 10;
  int budget = 4000;                // candidate draws before giving up
  double validity_threshold = 0.5;
  std::uint64_t seed = 0;
};

struct GeneratedExemplar {
  LatentPoint latent;
  Image image;
  Label label = 0;
  double score = 0.0;  // discriminator score at the gate
};

// Samples latent candidates uniformly inside the rule's feasible box (sides
// without a premise bound truncated at +-3 sigma of the prior), keeps those
// passing disde and classified required_label by the black box. Throws
// GenerationError with per-filter acceptance diagnostics when the budget
// yields nothing.
std::vector<GeneratedExemplar> generate_exemplars(const DecisionRule& rule,
                                                  Label required_label,
                                                  const AaeModel& aae, const BlackBox& bb,
                                                  const ExemplarConfig& cfg);
std::vector<GeneratedExemplar> generate_exemplars(const DecisionRule& rule,
                                                  const AaeModel& aae, const BlackBox& bb,
                                                  const ExemplarConfig& cfg);

// Same procedure per counterfactual rule, requiring that rule's label.
// Throws only if every rule comes up empty.
std::vector<GeneratedExemplar> generate_counter_exemplars(
    const std::vector<CounterfactualRule>& counterfactuals, const AaeModel& aae,
    const BlackBox& bb, int count_per_rule, int budget, double validity_threshold,
    std::uint64_t seed);

// s[i] = median over exemplars of (x[i] - exemplar[i]); an even count takes
// the mean of the two middle values.
Vector saliency_map(const Image& x, const std::vector<Image>& exemplars);

struct ExplainConfig {
  GenConfig neighborhood;
  TreeConfig tree;
  int num_exemplars = 10;
  int num_counter_exemplars = 2;  // total kept, drawn round-robin across rules
  int exemplar_budget = 4000;
  std::uint64_t seed = 0;
};

// Full pipeline: encode (mean) -> neighborhood -> surrogate tree -> rules ->
// exemplars and counter-exemplars -> saliency, with fidelity recorded.
Explanation explain_instance(const Image& x, const BlackBox& bb, const AaeModel& aae,
                             const ExplainConfig& cfg);

struct InterpolationStep {
  LatentPoint latent;
  Image image;
  Label label = 0;
  bool satisfies_constraint = false;
};

struct InterpolationSequence {
  std::vector<InterpolationStep> steps;
  LatentPoint from;
  LatentPoint to;
};

// Linear interpolation z + t*(h_c - z) for t = i/(steps-1); every step is
// decoded, labeled, and tagged with whether it satisfies the constraint.
InterpolationSequence interpolate(const LatentPoint& z, const LatentPoint& h_c,
                                  const std::vector<SplitCondition>& constraint,
                                  int steps, const AaeModel& aae, const BlackBox& bb);

// Manifest document for one explanation; image_names/counter_names are the
// files the caller wrote the PGMs to.
nlohmann::json explanation_to_json(const Explanation& e, const std::string& source_name,
                                   const std::vector<std::string>& exemplar_names,
                                   const std::vector<std::string>& counter_names,
                                   const std::string& saliency_csv_name);

// Writes manifest.json, source/exemplar/counter PGMs and the saliency CSV
// under dir; returns the manifest.
nlohmann::json write_explanation(const Explanation& e, const std::string& dir,
                                 int img_rows, int img_cols);

}  // namespace latexplain
