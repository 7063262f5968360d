#pragma once

#include "latexplain/blackbox.hpp"
#include "latexplain/common.hpp"
#include "latexplain/neighgen.hpp"
#include "latexplain/surrogate.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace latexplain {

struct MaskSpec {
  double tau = 50.0;  // percentile in [0,100]
  int color = 127;    // 0, 127 or 255 on the byte scale
};

struct RobustnessConfig {
  double epsilon = 0.1;     // neighbor radius, pixel distance on [0,1] scale
  double noise_rate = 0.05; // fraction of pixels hit by salt-and-pepper
  int replicas = 5;         // noisy copies per instance for stability
  int retries = 20;         // regeneration attempts per replica on label change
  std::uint64_t seed = 0;
};

// accuracy(b(decoded H), c(H)): fraction of the neighborhood where the
// surrogate agrees with the stored black-box labels.
double fidelity(const Neighborhood& neighborhood, const DecisionTree& tree);

// 1-NN over pixel space with the generated (counter-)exemplars as the
// reference set; distance ties break toward the lower reference index.
double knn_exemplar_accuracy(const std::vector<std::pair<Image, Label>>& references,
                             const Matrix& test_images, const std::vector<Label>& test_labels);

// Percentile by linear interpolation between order statistics.
double percentile_linear(std::vector<double> values, double tau);

// Replaces pixels whose saliency is strictly below the tau percentile of the
// saliency values with color/255.
Image mask_image(const Image& x, const Vector& saliency, const MaskSpec& spec);

// Fraction of instances whose black-box label survives masking.
double relevance(const Matrix& images, const std::vector<Vector>& saliencies,
                 const MaskSpec& spec, const BlackBox& bb);

// max over neighbors of ||s_i - s||_2 / ||x_i - x||_2; neighbors identical
// to x are excluded, and no qualifying neighbor yields nullopt.
std::optional<double> local_lipschitz(
    const Image& x, const Vector& s,
    const std::vector<std::pair<Image, Vector>>& neighbors);

struct RobustnessReport {
  double mean = 0.0;
  double stddev = 0.0;
  int evaluated = 0;
  int skipped = 0;  // instances with no qualifying neighbor
  std::vector<std::pair<int, double>> per_instance;  // (instance index, value)

  double coverage() const {
    const int total = evaluated + skipped;
    return total == 0 ? 0.0 : static_cast<double>(evaluated) / total;
  }
};

using SaliencyFn = std::function<Vector(const Image&)>;

// Coherence: neighbors are real instances from the pool within epsilon.
RobustnessReport coherence(const Matrix& instances, const Matrix& pool,
                           const SaliencyFn& explain_fn, const RobustnessConfig& cfg);

// Stability: neighbors are salt-and-pepper copies keeping the black-box
// label; copies that change it are regenerated up to cfg.retries times.
RobustnessReport stability(const Matrix& instances, const SaliencyFn& explain_fn,
                           const BlackBox& bb, const RobustnessConfig& cfg);

// Sets a seeded floor(rate*n)-subset of pixels to 0 or 1 with equal
// probability.
Image salt_pepper(const Image& x, double rate, std::uint64_t seed);

}  // namespace latexplain
