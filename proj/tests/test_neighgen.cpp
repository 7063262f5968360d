#include "latexplain/neighgen.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace latexplain;

namespace {

// 4-pixel, 2-latent toy world: pixel 0 tracks latent 0 through a steep
// sigmoid, and the black box labels by pixel 0 alone, so the latent space
// has a clean class boundary at z0 = 0 (label 0 for z0 > 0).
AaeModel toy_aae(double disc_bias = 0.0) {
  AaeModel model;
  model.n = 4;
  model.k = 2;

  Layer enc;
  enc.weights = Matrix::Zero(4, 4);
  enc.weights(0, 0) = 1.0;
  enc.weights(1, 1) = 1.0;
  enc.bias = Vector::Zero(4);
  enc.activation = Activation::linear;
  model.encoder.layers = {enc};

  Layer dec;
  dec.weights = Matrix(4, 2);
  dec.weights << 4.0, 0.0, 0.0, 4.0, -4.0, 0.0, 0.0, -4.0;
  dec.bias = Vector::Zero(4);
  dec.activation = Activation::sigmoid;
  model.decoder.layers = {dec};

  Layer disc;
  disc.weights = Matrix::Zero(1, 2);
  disc.bias = Vector::Constant(1, disc_bias);
  disc.activation = Activation::sigmoid;
  model.discriminator.layers = {disc};
  return model;
}

BlackBox toy_blackbox() {
  Mlp net;
  Layer layer;
  layer.weights = Matrix::Zero(2, 4);
  layer.weights(0, 0) = 10.0;
  layer.bias = Vector(2);
  layer.bias << 0.0, 5.0;
  layer.activation = Activation::softmax;
  net.layers.push_back(layer);
  return make_builtin_blackbox(std::move(net), 2);
}

BlackBox constant_blackbox() {
  Mlp net;
  Layer layer;
  layer.weights = Matrix::Zero(2, 4);
  layer.bias = Vector(2);
  layer.bias << 1.0, 0.0;
  layer.activation = Activation::softmax;
  net.layers.push_back(layer);
  return make_builtin_blackbox(std::move(net), 2);
}

}  // namespace

TEST_SUITE_BEGIN("neighgen");

TEST_CASE("fitness at the anchor point with a matching label is one") {
  LatentPoint z(2);
  z << 0.4, -0.2;
  CHECK(fitness_same(z, z, 5, 5) == doctest::Approx(1.0));  // 1 + 1 - 1
  CHECK(fitness_diff(z, z, 5, 5) == doctest::Approx(0.0));  // 0 + 1 - 1
}

TEST_CASE("fitness approaches one for a far matching point") {
  LatentPoint z = Vector::Zero(2);
  LatentPoint h = Vector::Constant(2, 1e6);
  CHECK(fitness_same(h, z, 3, 3) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("fitness matches the hand-evaluated unit-distance case") {
  LatentPoint z = Vector::Zero(1);
  LatentPoint h = Vector::Constant(1, 1.0);  // d = 1, squashed to 0.5
  CHECK(fitness_same(h, z, 2, 2) == doctest::Approx(1.5));
  CHECK(fitness_diff(h, z, 2, 2) == doctest::Approx(0.5));
}

TEST_CASE("complementary fitness pair satisfies the metamorphic identity") {
  LatentPoint z(3);
  z << 0.1, -0.5, 2.0;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> dist(0.0, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    LatentPoint h(3);
    for (Eigen::Index i = 0; i < 3; ++i) h(i) = z(i) + dist(rng);
    const double d = (h - z).norm();
    const double squashed = d / (1.0 + d);
    const double self = (h - z).lpNorm<Eigen::Infinity>() < 1e-9 ? 1.0 : 0.0;
    const double expected = 1.0 + 2.0 * (1.0 - squashed) - 2.0 * self;
    CHECK(fitness_same(h, z, 1, 1) + fitness_diff(h, z, 1, 1) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("convenience fitness queries the black box through the decoder") {
  const AaeModel aae = toy_aae();
  const BlackBox bb = toy_blackbox();
  LatentPoint z(2), h(2);
  z << 1.0, 0.0;   // decodes with label 0
  h << -1.0, 0.0;  // decodes with label 1
  const double d = (h - z).norm();
  CHECK(fitness_same(h, z, bb, aae) == doctest::Approx(1.0 - d / (1.0 + d)));
  CHECK(fitness_diff(h, z, bb, aae) == doctest::Approx(2.0 - d / (1.0 + d)));
}

TEST_CASE("gating off and search off yields n_total perturbations") {
  const AaeModel aae = toy_aae();
  const BlackBox bb = toy_blackbox();
  LatentPoint z(2);
  z << 0.0, 0.0;
  GenConfig cfg;
  cfg.n_total = 10;
  cfg.population = 10;
  cfg.generations = 0;
  cfg.validity_threshold = 0.0;
  cfg.seed = 21;
  const Neighborhood neigh = generate_neighborhood(z, bb, aae, cfg);
  CHECK(neigh.size() == 10);
  for (Eigen::Index i = 0; i < neigh.size(); ++i)
    CHECK((neigh.latents.row(i).transpose() - z).norm() > 0.0);
}

TEST_CASE("seeded generation is deterministic") {
  const AaeModel aae = toy_aae();
  const BlackBox bb = toy_blackbox();
  LatentPoint z(2);
  z << 0.3, -0.1;
  GenConfig cfg;
  cfg.n_total = 24;
  cfg.population = 16;
  cfg.generations = 4;
  cfg.seed = 77;
  const Neighborhood a = generate_neighborhood(z, bb, aae, cfg);
  const Neighborhood b = generate_neighborhood(z, bb, aae, cfg);
  CHECK(a.latents == b.latents);
  CHECK(a.labels == b.labels);
  CHECK(a.target_label == b.target_label);
}

TEST_CASE("neighborhood holds both label groups and honors the gate") {
  const AaeModel aae = toy_aae();  // score exactly 0.5 everywhere
  const BlackBox bb = toy_blackbox();
  LatentPoint z(2);
  z << 0.5, 0.2;
  GenConfig cfg;
  cfg.n_total = 30;
  cfg.population = 20;
  cfg.generations = 3;
  cfg.validity_threshold = 0.5;
  cfg.seed = 5;
  const Neighborhood neigh = generate_neighborhood(z, bb, aae, cfg);
  CHECK_FALSE(neigh.degenerate);
  CHECK(neigh.size() == 30);
  CHECK(neigh.target_label == classify_one(bb, decode(aae, z)));

  bool has_same = false, has_diff = false;
  for (Label l : neigh.labels) (l == neigh.target_label ? has_same : has_diff) = true;
  CHECK(has_same);
  CHECK(has_diff);

  const Vector scores = discriminate_batch(aae, neigh.latents);
  CHECK(scores.minCoeff() >= cfg.validity_threshold);

  // Stored labels must equal a post-hoc reclassification of the decodes.
  const std::vector<Label> recomputed = classify(bb, decode_batch(aae, neigh.latents));
  CHECK(recomputed == neigh.labels);
}

TEST_CASE("a constant black box produces a degenerate neighborhood") {
  const AaeModel aae = toy_aae();
  const BlackBox bb = constant_blackbox();
  LatentPoint z = Vector::Zero(2);
  GenConfig cfg;
  cfg.n_total = 12;
  cfg.population = 8;
  cfg.generations = 2;
  cfg.seed = 9;
  const Neighborhood neigh = generate_neighborhood(z, bb, aae, cfg);
  CHECK(neigh.degenerate);
  for (Label l : neigh.labels) CHECK(l == neigh.target_label);
}

TEST_CASE("an impossible gate raises a generation error") {
  const AaeModel aae = toy_aae(-1000.0);  // discriminator saturated to 0
  const BlackBox bb = toy_blackbox();
  GenConfig cfg;
  cfg.n_total = 8;
  cfg.population = 6;
  cfg.generations = 1;
  cfg.validity_threshold = 0.5;
  CHECK_THROWS_AS(generate_neighborhood(Vector::Zero(2), bb, aae, cfg), GenerationError);
}

TEST_CASE("raising the validity threshold never admits new points") {
  // Discriminator score varies with z0, so thresholds carve nested sets.
  AaeModel aae = toy_aae();
  aae.discriminator.layers[0].weights(0, 0) = 1.0;
  const BlackBox bb = constant_blackbox();  // quotas stay unmet: full pad budget both runs
  LatentPoint z = Vector::Zero(2);
  GenConfig cfg;
  cfg.n_total = 400;  // far above what the budget can produce
  cfg.population = 10;
  cfg.generations = 1;
  cfg.seed = 33;

  auto as_set = [](const Neighborhood& n) {
    std::set<std::vector<double>> out;
    for (Eigen::Index i = 0; i < n.size(); ++i) {
      std::vector<double> row(n.latents.row(i).begin(), n.latents.row(i).end());
      out.insert(std::move(row));
    }
    return out;
  };

  GenConfig lo = cfg, hi = cfg;
  lo.validity_threshold = 0.4;
  hi.validity_threshold = 0.6;
  const auto loose = as_set(generate_neighborhood(z, bb, aae, lo));
  const auto strict = as_set(generate_neighborhood(z, bb, aae, hi));
  CHECK(strict.size() < loose.size());
  for (const auto& point : strict) CHECK(loose.count(point) == 1);
}

TEST_SUITE_END();
