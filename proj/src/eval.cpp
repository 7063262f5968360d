#include "latexplain/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace latexplain {

double fidelity(const Neighborhood& neighborhood, const DecisionTree& tree) {
  if (neighborhood.size() == 0) throw ShapeError("fidelity: empty neighborhood");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < neighborhood.size(); ++i) {
    const LatentPoint h = neighborhood.latents.row(i).transpose();
    if (predict(tree, h) == neighborhood.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(neighborhood.size());
}

double knn_exemplar_accuracy(const std::vector<std::pair<Image, Label>>& references,
                             const Matrix& test_images, const std::vector<Label>& test_labels) {
  if (references.empty()) throw ShapeError("knn: empty reference set");
  if (test_images.rows() == 0) throw ShapeError("knn: empty test set");
  if (test_images.rows() != static_cast<Eigen::Index>(test_labels.size()))
    throw ShapeError("knn: test image and label counts differ");
  Eigen::Index hits = 0;
  for (Eigen::Index t = 0; t < test_images.rows(); ++t) {
    std::size_t best = 0;
    double best_dist = (test_images.row(t).transpose() - references[0].first).squaredNorm();
    for (std::size_t r = 1; r < references.size(); ++r) {
      const double d = (test_images.row(t).transpose() - references[r].first).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = r;
      }
    }
    if (references[best].second == test_labels[static_cast<std::size_t>(t)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_images.rows());
}

double percentile_linear(std::vector<double> values, double tau) {
  if (values.empty()) throw ShapeError("percentile: empty value set");
  if (tau < 0.0 || tau > 100.0) throw ConfigError("percentile: tau must lie in [0,100]");
  std::sort(values.begin(), values.end());
  const double rank = tau / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

Image mask_image(const Image& x, const Vector& saliency, const MaskSpec& spec) {
  if (x.size() != saliency.size())
    throw ShapeError("mask_image: saliency length does not match pixel count");
  std::vector<double> values(saliency.data(), saliency.data() + saliency.size());
  const double cut = percentile_linear(std::move(values), spec.tau);
  Image masked = x;
  const double color = spec.color / 255.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (saliency(i) < cut) masked(i) = color;
  return masked;
}

double relevance(const Matrix& images, const std::vector<Vector>& saliencies,
                 const MaskSpec& spec, const BlackBox& bb) {
  if (images.rows() == 0) throw ShapeError("relevance: empty instance set");
  if (images.rows() != static_cast<Eigen::Index>(saliencies.size()))
    throw ShapeError("relevance: image and saliency counts differ");
  const std::vector<Label> original = classify(bb, images);
  Matrix masked(images.rows(), images.cols());
  for (Eigen::Index i = 0; i < images.rows(); ++i)
    masked.row(i) =
        mask_image(images.row(i).transpose(), saliencies[static_cast<std::size_t>(i)], spec)
            .transpose();
  const std::vector<Label> after = classify(bb, masked);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < images.rows(); ++i)
    if (original[static_cast<std::size_t>(i)] == after[static_cast<std::size_t>(i)]) ++kept;
  return static_cast<double>(kept) / static_cast<double>(images.rows());
}

std::optional<double> local_lipschitz(
    const Image& x, const Vector& s,
    const std::vector<std::pair<Image, Vector>>& neighbors) {
  std::optional<double> best;
  for (const auto& [xi, si] : neighbors) {
    const double dx = (xi - x).norm();
    if (dx == 0.0) continue;
    const double ratio = (si - s).norm() / dx;
    if (!best || ratio > *best) best = ratio;
  }
  return best;
}

namespace {

RobustnessReport finalize(std::vector<std::pair<int, double>> per_instance, int skipped) {
  RobustnessReport report;
  report.per_instance = std::move(per_instance);
  report.evaluated = static_cast<int>(report.per_instance.size());
  report.skipped = skipped;
  if (report.evaluated > 0) {
    double sum = 0.0;
    for (const auto& [idx, v] : report.per_instance) sum += v;
    report.mean = sum / report.evaluated;
    double sq = 0.0;
    for (const auto& [idx, v] : report.per_instance) sq += (v - report.mean) * (v - report.mean);
    report.stddev = std::sqrt(sq / report.evaluated);
  }
  return report;
}

}  // namespace

RobustnessReport coherence(const Matrix& instances, const Matrix& pool,
                           const SaliencyFn& explain_fn, const RobustnessConfig& cfg) {
  std::vector<std::pair<int, double>> values;
  int skipped = 0;
  // Saliency maps for pool members are computed lazily and memoized; several
  // instances may share a neighbor.
  std::vector<std::optional<Vector>> pool_saliency(static_cast<std::size_t>(pool.rows()));
  for (Eigen::Index i = 0; i < instances.rows(); ++i) {
    const Image x = instances.row(i).transpose();
    std::vector<std::pair<Image, Vector>> neighbors;
    for (Eigen::Index p = 0; p < pool.rows(); ++p) {
      const Image xp = pool.row(p).transpose();
      const double d = (xp - x).norm();
      if (d == 0.0 || d > cfg.epsilon) continue;
      auto& cached = pool_saliency[static_cast<std::size_t>(p)];
      if (!cached) cached = explain_fn(xp);
      neighbors.emplace_back(xp, *cached);
    }
    if (neighbors.empty()) {
      ++skipped;
      continue;
    }
    const Vector s = explain_fn(x);
    const auto value = local_lipschitz(x, s, neighbors);
    if (value) values.emplace_back(static_cast<int>(i), *value);
    else ++skipped;
  }
  return finalize(std::move(values), skipped);
}

RobustnessReport stability(const Matrix& instances, const SaliencyFn& explain_fn,
                           const BlackBox& bb, const RobustnessConfig& cfg) {
  std::vector<std::pair<int, double>> values;
  int skipped = 0;
  for (Eigen::Index i = 0; i < instances.rows(); ++i) {
    const Image x = instances.row(i).transpose();
    const Label original = classify_one(bb, x);
    std::vector<std::pair<Image, Vector>> neighbors;
    for (int r = 0; r < cfg.replicas; ++r) {
      for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        const std::uint64_t noise_seed = derive_seed(
            cfg.seed, "stability/" + std::to_string(i) + "/" + std::to_string(r) + "/" +
                          std::to_string(attempt));
        const Image noisy = salt_pepper(x, cfg.noise_rate, noise_seed);
        if ((noisy - x).norm() == 0.0) continue;
        if (classify_one(bb, noisy) != original) continue;  // same-outcome copies only
        neighbors.emplace_back(noisy, explain_fn(noisy));
        break;
      }
    }
    if (neighbors.empty()) {
      ++skipped;
      continue;
    }
    const Vector s = explain_fn(x);
    const auto value = local_lipschitz(x, s, neighbors);
    if (value) values.emplace_back(static_cast<int>(i), *value);
    else ++skipped;
  }
  return finalize(std::move(values), skipped);
}

Image salt_pepper(const Image& x, double rate, std::uint64_t seed) {
  if (rate <= 0.0 || rate >= 1.0) throw ConfigError("salt_pepper: rate must lie in (0,1)");
  const auto n = static_cast<std::size_t>(x.size());
  const auto hits = static_cast<std::size_t>(rate * static_cast<double>(n));
  Image noisy = x;
  if (hits == 0) return noisy;
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `hits` entries form the pixel subset.
  for (std::size_t i = 0; i < hits; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(indices[i], indices[pick(rng)]);
  }
  std::uniform_int_distribution<int> coin(0, 1);
  for (std::size_t i = 0; i < hits; ++i)
    noisy(static_cast<Eigen::Index>(indices[i])) = coin(rng) == 0 ? 0.0 : 1.0;
  return noisy;
}

}  // namespace latexplain
