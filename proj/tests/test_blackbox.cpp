#include "latexplain/blackbox.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

using namespace latexplain;

namespace {

Mlp hand_classifier() {
  // 2 -> 3 softmax with fixed weights; argmax is easy to read off by hand.
  Mlp net;
  Layer layer;
  layer.weights = Matrix(3, 2);
  layer.weights << 1.0, 0.0, 0.0, 1.0, -1.0, -1.0;
  layer.bias = Vector::Zero(3);
  layer.activation = Activation::softmax;
  net.layers.push_back(layer);
  return net;
}

std::string stub_command() {
  const char* stub = std::getenv("ORACLE_STUB");
  REQUIRE_MESSAGE(stub != nullptr, "ORACLE_STUB must point at the oracle stub binary");
  return std::string(stub) + " {req} {resp}";
}

std::string oracle_workdir() {
  const auto dir = std::filesystem::temp_directory_path() / "latexplain_oracle_tests";
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_SUITE_BEGIN("blackbox");

TEST_CASE("empty batch classifies to an empty list") {
  const BlackBox bb = make_builtin_blackbox(hand_classifier(), 3);
  CHECK(classify(bb, Matrix(0, 2)).empty());
}

TEST_CASE("builtin labels are the argmax of the net output") {
  const BlackBox bb = make_builtin_blackbox(hand_classifier(), 3);
  Matrix batch(3, 2);
  batch << 2.0, 0.5,   // logits (2, .5, -2.5) -> class 0
      0.1, 1.0,        // logits (.1, 1, -1.1) -> class 1
      -1.0, -2.0;      // logits (-1, -2, 3)   -> class 2
  const std::vector<Label> labels = classify(bb, batch);
  CHECK(labels == std::vector<Label>{0, 1, 2});
}

TEST_CASE("argmax ties break toward the lowest class index") {
  Mlp net = hand_classifier();
  net.layers[0].weights.setZero();  // uniform softmax everywhere
  const BlackBox bb = make_builtin_blackbox(std::move(net), 3);
  CHECK(classify_one(bb, Vector::Constant(2, 0.3)) == 0);
}

TEST_CASE("identical images receive identical labels") {
  const BlackBox bb = make_builtin_blackbox(hand_classifier(), 3);
  Matrix batch(4, 2);
  for (Eigen::Index r = 0; r < 4; ++r) batch.row(r) << 0.7, 0.1;
  const std::vector<Label> labels = classify(bb, batch);
  for (Label l : labels) CHECK(l == labels[0]);
}

TEST_CASE("classify rejects a pixel-count mismatch") {
  const BlackBox bb = make_builtin_blackbox(hand_classifier(), 3);
  CHECK_THROWS_AS(classify(bb, Matrix(1, 5)), ShapeError);
}

TEST_CASE("oracle wire format round trips byte-stably") {
  Matrix batch(2, 3);
  batch << 0.25, 0.5, 0.75, 0.0, 1.0, 0.125;
  std::ostringstream first;
  write_oracle_request(first, batch);
  std::istringstream mid(first.str());
  const Matrix parsed = read_oracle_request(mid);
  std::ostringstream second;
  write_oracle_request(second, parsed);
  CHECK(first.str() == second.str());
  CHECK(parsed.rows() == 2);
  CHECK(parsed.cols() == 3);

  const std::vector<Label> labels = {3, 1, 4};
  std::ostringstream resp;
  write_oracle_response(resp, labels);
  std::istringstream resp_in(resp.str());
  CHECK(read_oracle_response(resp_in, 3) == labels);
}

TEST_CASE("external oracle classifies through the stub process") {
  const BlackBox bb = make_external_blackbox(stub_command(), 3, 2, oracle_workdir());
  Matrix batch(3, 3);
  batch << 0.9, 0.0, 0.0,  // first pixel > 0.5 -> 1
      0.1, 0.9, 0.9,       // -> 0
      0.6, 0.2, 0.2;       // -> 1
  CHECK(classify(bb, batch) == std::vector<Label>{1, 0, 1});
}

TEST_CASE("external oracle failures carry diagnostics") {
  SUBCASE("nonzero exit status") {
    const BlackBox bb = make_external_blackbox("false {req} {resp}", 2, 2, oracle_workdir());
    CHECK_THROWS_AS(classify(bb, Matrix::Zero(1, 2)), OracleError);
  }
  SUBCASE("missing response file") {
    const BlackBox bb = make_external_blackbox("true {req} {resp}", 2, 2, oracle_workdir());
    CHECK_THROWS_AS(classify(bb, Matrix::Zero(1, 2)), OracleError);
  }
  SUBCASE("template without placeholders") {
    CHECK_THROWS_AS(make_external_blackbox("true", 2, 2, oracle_workdir()), ConfigError);
  }
}

TEST_CASE("train_builtin separates two gaussian blobs") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.08);
  Matrix images(80, 4);
  std::vector<Label> labels(80);
  for (Eigen::Index i = 0; i < 80; ++i) {
    const bool hot = i % 2 == 0;
    for (Eigen::Index p = 0; p < 4; ++p)
      images(i, p) = std::clamp((hot ? 0.8 : 0.2) + noise(rng), 0.0, 1.0);
    labels[static_cast<std::size_t>(i)] = hot ? 1 : 0;
  }
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.seed = 3;
  BlackBoxTrainReport report;
  const BlackBox bb = train_builtin(images, labels, 2, {8}, cfg, 0.25, &report);
  CHECK(report.test_count == 20);
  CHECK(report.test_accuracy >= 0.9);

  BlackBoxTrainReport again;
  train_builtin(images, labels, 2, {8}, cfg, 0.25, &again);
  CHECK(again.test_accuracy == report.test_accuracy);
  CHECK(again.train_accuracy == report.train_accuracy);
}

TEST_CASE("single-class training is trivially perfect") {
  Matrix images = Matrix::Constant(10, 3, 0.4);
  std::vector<Label> labels(10, 0);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 1;
  BlackBoxTrainReport report;
  train_builtin(images, labels, 1, {4}, cfg, 0.2, &report);
  CHECK(report.train_accuracy == 1.0);
  CHECK(report.test_accuracy == 1.0);
}

TEST_CASE("out-of-range labels are rejected") {
  Matrix images = Matrix::Zero(4, 2);
  CHECK_THROWS_AS(train_builtin(images, {0, 1, 2, 5}, 3, {4}, TrainConfig{}, 0.25, nullptr),
                  ShapeError);
}

TEST_SUITE_END();
