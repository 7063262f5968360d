#include "latexplain/aae.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace latexplain;

namespace {

// Hand-set AAE pieces over 3 pixels and 1 latent feature.
AaeModel tiny_model(double disc_weight = 0.0, double enc_logvar_bias = 0.0) {
  AaeModel model;
  model.n = 3;
  model.k = 1;

  Layer enc;
  enc.weights = Matrix(2, 3);
  enc.weights << 0.5, -1.0, 2.0,  // mean row
      0.0, 0.0, 0.0;              // log-variance row
  enc.bias = Vector(2);
  enc.bias << 0.1, enc_logvar_bias;
  enc.activation = Activation::linear;
  model.encoder.layers = {enc};

  Layer dec;
  dec.weights = Matrix::Zero(3, 1);
  dec.bias = Vector::Zero(3);
  dec.activation = Activation::sigmoid;
  model.decoder.layers = {dec};

  Layer disc;
  disc.weights = Matrix::Constant(1, 1, disc_weight);
  disc.bias = Vector::Zero(1);
  disc.activation = Activation::sigmoid;
  model.discriminator.layers = {disc};
  return model;
}

Matrix blob_dataset(Eigen::Index count, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix data(count, n);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double base = (i % 2 == 0) ? 0.2 : 0.8;
    for (Eigen::Index p = 0; p < n; ++p)
      data(i, p) = std::clamp(base + noise(rng), 0.0, 1.0);
  }
  return data;
}

}  // namespace

TEST_SUITE_BEGIN("aae");

TEST_CASE("mean-mode encoding is deterministic and matches the hand product") {
  const AaeModel model = tiny_model();
  Image x(3);
  x << 1.0, 0.5, 0.25;
  const LatentPoint z1 = encode(model, x, EncodeMode::mean);
  const LatentPoint z2 = encode(model, x, EncodeMode::mean);
  CHECK(z1 == z2);
  // mu = 0.5*1 - 1*0.5 + 2*0.25 + 0.1
  CHECK(z1(0) == doctest::Approx(0.5 * 1.0 - 1.0 * 0.5 + 2.0 * 0.25 + 0.1));
}

TEST_CASE("sampling with collapsed variance equals the mean") {
  const AaeModel model = tiny_model(0.0, -1e9);  // sigma = exp(-5e8) = 0
  Image x(3);
  x << 0.3, 0.6, 0.9;
  CHECK(encode(model, x, EncodeMode::sample, 77) == encode(model, x, EncodeMode::mean));
}

TEST_CASE("encode rejects the wrong pixel count") {
  const AaeModel model = tiny_model();
  CHECK_THROWS_AS(encode(model, Vector::Zero(4), EncodeMode::mean), ShapeError);
  CHECK_THROWS_AS(decode(model, Vector::Zero(2)), ShapeError);
}

TEST_CASE("decoded pixels stay inside the unit interval") {
  const AaeModel model = make_aae(12, 3, {8}, {8}, {6}, 0.5, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    LatentPoint z(3);
    for (Eigen::Index i = 0; i < 3; ++i) z(i) = dist(rng);
    const Image img = decode(model, z);
    CHECK(img.minCoeff() >= 0.0);
    CHECK(img.maxCoeff() <= 1.0);
    CHECK(img.size() == 12);
  }
}

TEST_CASE("zero-weight decoder yields the constant sigmoid of its bias") {
  AaeModel model = tiny_model();
  model.decoder.layers[0].bias << 1.0, 0.0, -2.0;
  const Image img = decode(model, Vector::Constant(1, 5.0));
  CHECK(img(0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(img(1) == doctest::Approx(0.5));
  CHECK(img(2) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
}

TEST_CASE("zero-weight discriminator scores one half everywhere") {
  const AaeModel model = tiny_model();
  CHECK(discriminate(model, Vector::Constant(1, -3.0)) == doctest::Approx(0.5));
  CHECK(discriminate(model, Vector::Constant(1, 42.0)) == doctest::Approx(0.5));
  const LatentPoint z = Vector::Constant(1, 1.5);
  CHECK(discriminate(model, z) == discriminate(model, z));
}

TEST_CASE("disde gate semantics") {
  const AaeModel model = tiny_model();  // score is exactly 0.5
  const LatentPoint h = Vector::Constant(1, 0.7);
  CHECK(disde(model, h, 0.0).valid);
  CHECK_FALSE(disde(model, h, 1.0).valid);
  SUBCASE("boundary uses >=") {
    const DisdeResult r = disde(model, h, 0.5);
    CHECK(r.valid);
    CHECK(r.score == doctest::Approx(0.5));
    CHECK(r.image.size() == 3);
  }
}

TEST_CASE("disde at threshold one accepts a saturated score") {
  AaeModel model = tiny_model();
  model.discriminator.layers[0].bias << 1000.0;  // sigmoid saturates to exactly 1
  CHECK(disde(model, Vector::Constant(1, 0.0), 1.0).valid);
}

TEST_CASE("zero training epochs return the initialized model") {
  const Matrix data = blob_dataset(20, 6, 1);
  AaeTrainConfig cfg;
  cfg.k = 2;
  cfg.enc_hidden = {8};
  cfg.dec_hidden = {8};
  cfg.disc_hidden = {4};
  cfg.recon_cfg.epochs = 0;
  const AaeModel trained = train_aae(data, cfg, 9);
  const AaeModel fresh = make_aae(6, 2, cfg.enc_hidden, cfg.dec_hidden, cfg.disc_hidden,
                                  cfg.validity_threshold, derive_seed(9, "aae/init"));
  std::ostringstream a, b;
  save_aae(trained, a);
  save_aae(fresh, b);
  CHECK(a.str() == b.str());
}

TEST_CASE("seeded training runs are bit-identical and do learn") {
  const Matrix data = blob_dataset(40, 6, 2);
  AaeTrainConfig cfg;
  cfg.k = 2;
  cfg.enc_hidden = {12};
  cfg.dec_hidden = {12};
  cfg.disc_hidden = {6};
  cfg.recon_cfg.epochs = 40;
  cfg.recon_cfg.batch_size = 10;
  cfg.recon_cfg.learning_rate = 5e-3;
  cfg.reg_cfg.learning_rate = 1e-3;
  const AaeModel m1 = train_aae(data, cfg, 4);
  const AaeModel m2 = train_aae(data, cfg, 4);
  std::ostringstream a, b;
  save_aae(m1, a);
  save_aae(m2, b);
  CHECK(a.str() == b.str());

  AaeTrainConfig fresh_cfg = cfg;
  fresh_cfg.recon_cfg.epochs = 0;
  const AaeModel untrained = train_aae(data, fresh_cfg, 4);
  CHECK(reconstruction_rmse(m1, data) < reconstruction_rmse(untrained, data));
}

TEST_CASE("rmse is zero when the decoder reproduces the input exactly") {
  const AaeModel model = tiny_model();  // zero-weight decoder emits 0.5 everywhere
  const Matrix data = Matrix::Constant(4, 3, 0.5);
  CHECK(reconstruction_rmse(model, data) == doctest::Approx(0.0));
}

TEST_CASE("rmse of an all-black image reconstructed all-white is 255") {
  AaeModel model = tiny_model();
  model.encoder.layers[0].weights.setZero();
  model.encoder.layers[0].bias.setZero();
  model.decoder.layers[0].bias << 1000.0, 1000.0, 1000.0;  // sigmoid = 1 exactly
  const Matrix data = Matrix::Zero(1, 3);
  CHECK(reconstruction_rmse(model, data) == doctest::Approx(255.0));
}

TEST_CASE("rmse matches a hand-computed two-image case") {
  AaeModel model = tiny_model();
  model.decoder.layers[0].bias << 1000.0, -1000.0, 1000.0;  // fixed (1, 0, 1) output
  Matrix data(2, 3);
  data << 1.0, 0.0, 1.0,   // reconstructed exactly
      0.5, 0.25, 1.0;      // differences -0.5, 0.25, 0
  const double expected = 255.0 * std::sqrt((0.25 + 0.0625) / 6.0);
  CHECK(reconstruction_rmse(model, data) == doctest::Approx(expected));
}

TEST_CASE("rmse rejects an empty dataset") {
  const AaeModel model = tiny_model();
  CHECK_THROWS_AS(reconstruction_rmse(model, Matrix(0, 3)), ShapeError);
}

TEST_CASE("aae checkpoint round trips byte-identically") {
  const AaeModel model = make_aae(10, 2, {6}, {6}, {4}, 0.5, 13);
  std::ostringstream out;
  save_aae(model, out);
  std::istringstream in(out.str());
  const AaeModel loaded = load_aae(in);
  CHECK(loaded.n == 10);
  CHECK(loaded.k == 2);
  CHECK(loaded.validity_threshold == 0.5);
  std::ostringstream again;
  save_aae(loaded, again);
  CHECK(again.str() == out.str());
}

TEST_SUITE_END();
