#pragma once

#include "latexplain/aae.hpp"
#include "latexplain/blackbox.hpp"
#include "latexplain/common.hpp"

#include <optional>
#include <vector>

namespace latexplain {

// Latent neighborhood around a point z: validity-gated latent instances, the
// images they decode to, and their black-box labels. Split into same-label
// (== target_label) and different-label parts by construction.
struct Neighborhood {
  Matrix latents;   // |H| x k
  Matrix decoded;   // |H| x n
  std::vector<Label> labels;
  Label target_label = 0;
  bool degenerate = false;  // one of the two label groups came up empty

  Eigen::Index size() const { return latents.rows(); }
};

struct GenConfig {
  int n_total = 300;          // target neighborhood size
  double balance = 0.5;       // fraction reserved for same-label instances
  int population = 100;
  int generations = 20;
  double crossover_prob = 0.5;
  double mutation_prob = 0.2;
  double mutation_sigma = 0.5;
  double validity_threshold = 0.5;
  std::uint64_t seed = 0;
};

// Fitness of a latent candidate for the same-label group:
//   1[label(h) == target] + (1 - d(z,h)) - 1[h == z]
// with d the Euclidean distance squashed by d/(1+d) into [0,1).
// fitness_diff swaps the indicator to label(h) != target.
double fitness_same(const LatentPoint& h, const LatentPoint& z, Label h_label, Label target);
double fitness_diff(const LatentPoint& h, const LatentPoint& z, Label h_label, Label target);

// Convenience forms that query the black box through the decoder.
double fitness_same(const LatentPoint& h, const LatentPoint& z, const BlackBox& bb,
                    const AaeModel& aae);
double fitness_diff(const LatentPoint& h, const LatentPoint& z, const BlackBox& bb,
                    const AaeModel& aae);

// Runs one genetic search per fitness (tournament selection of size 3,
// uniform crossover, Gaussian mutation, elitism), merges the final
// populations, gates them through disde, deduplicates, and balances to
// cfg.n_total with extra gated samples around z. target overrides the label
// the neighborhood is built around; by default it is the black-box label of
// decode(z). Throws GenerationError when no candidate passes the gate.
Neighborhood generate_neighborhood(const LatentPoint& z, const BlackBox& bb,
                                   const AaeModel& aae, const GenConfig& cfg,
                                   std::optional<Label> target = std::nullopt);

}  // namespace latexplain
