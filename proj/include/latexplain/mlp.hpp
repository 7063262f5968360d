#pragma once

#include "latexplain/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace latexplain {

// Tag values are part of the checkpoint format; do not reorder.
enum class Activation : std::uint8_t {
  linear = 0,
  relu = 1,
  sigmoid = 2,
  tanh = 3,
  softmax = 4,
};

enum class Loss { mse, cross_entropy, bce };

enum class OptimizerKind { sgd, adam };

struct Layer {
  Matrix weights;  // output_dim x input_dim
  Vector bias;     // output_dim
  Activation activation = Activation::linear;
};

// Plain dense multilayer perceptron. Softmax is only valid as the final
// activation; consecutive layer dimensions must chain.
struct Mlp {
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
};

// Builds an Mlp with dims = {in, h1, ..., out} and one activation per layer.
// Weights are uniform in +-sqrt(6/(fan_in+fan_out)) from the given seed,
// biases zero.
Mlp make_mlp(const std::vector<Eigen::Index>& dims,
             const std::vector<Activation>& activations, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 1;
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 0;
};

// batch: one sample per row. Throws ShapeError on dimension mismatch.
Matrix forward(const Mlp& net, const Matrix& batch);

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer
  const Matrix& output() const { return post.back(); }
};

ForwardTrace forward_trace(const Mlp& net, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
};

double loss_value(const Matrix& output, const Matrix& targets, Loss loss);

// Backprop from a loss. Fills grads and returns dLoss/dInput. Uses the fused
// softmax+cross-entropy and sigmoid+bce forms when they apply.
Matrix backward_loss(const Mlp& net, const ForwardTrace& trace,
                     const Matrix& targets, Loss loss, Gradients& grads);

// Backprop from an upstream gradient on the net output (post-activation).
// Needed when several nets are chained, as in adversarial training.
Matrix backward_output(const Mlp& net, const ForwardTrace& trace,
                       const Matrix& upstream, Gradients& grads);

struct OptimizerState {
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_bias, v_bias;
  long step_count = 0;
};

void apply_gradients(Mlp& net, const Gradients& grads, const TrainConfig& cfg,
                     OptimizerState& state);

// One optimizer step on one batch; returns the pre-update loss. Throws
// TrainingError if the loss is not finite.
double train_step(Mlp& net, const Matrix& batch, const Matrix& targets,
                  Loss loss, const TrainConfig& cfg, OptimizerState& state);

// Max over parameters of |analytic - central difference| relative error.
// h must lie in (1e-7, 1e-3).
double gradient_check(const Mlp& net, const Matrix& batch,
                      const Matrix& targets, Loss loss, double h);

// Checkpoint format: magic "MLP1", little-endian u32 layer count, per layer
// {u32 input_dim, u32 output_dim, u8 activation tag}, then per layer the raw
// little-endian f64 weights (row-major, output_dim x input_dim) and biases.
void save_mlp(const Mlp& net, std::ostream& out);
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(std::istream& in);
Mlp load_mlp(const std::string& path);

}  // namespace latexplain
