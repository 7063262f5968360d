#include "latexplain/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace latexplain {

namespace {

constexpr double kLogClamp = 1e-12;

void check_net(const Mlp& net) {
  if (net.layers.empty()) throw ShapeError("mlp has no layers");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    if (layer.weights.rows() != layer.bias.size())
      throw ShapeError("mlp layer " + std::to_string(l) + ": bias size does not match weight rows");
    if (l > 0 && net.layers[l - 1].weights.rows() != layer.weights.cols())
      throw ShapeError("mlp layer " + std::to_string(l) + ": input dim does not chain with previous layer");
    if (layer.activation == Activation::softmax && l + 1 != net.layers.size())
      throw ShapeError("softmax is only supported as the final activation");
  }
}

Matrix apply_activation(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::linear:
      return pre;
    case Activation::relu:
      return pre.cwiseMax(0.0);
    case Activation::sigmoid:
      return ((-pre.array()).exp() + 1.0).inverse().matrix();
    case Activation::tanh:
      return pre.array().tanh().matrix();
    case Activation::softmax: {
      Matrix out(pre.rows(), pre.cols());
      for (Eigen::Index r = 0; r < pre.rows(); ++r) {
        const double mx = pre.row(r).maxCoeff();
        Eigen::ArrayXd e = (pre.row(r).array() - mx).exp();
        out.row(r) = (e / e.sum()).matrix();
      }
      return out;
    }
  }
  throw ShapeError("unknown activation");
}

// delta = dLoss/dPre given dLoss/dPost, for elementwise activations.
// Softmax needs the full row Jacobian and is handled separately.
Matrix activation_backward(Activation act, const Matrix& pre, const Matrix& post,
                           const Matrix& grad_post) {
  switch (act) {
    case Activation::linear:
      return grad_post;
    case Activation::relu:
      return (pre.array() > 0.0).cast<double>().matrix().cwiseProduct(grad_post);
    case Activation::sigmoid:
      return (post.array() * (1.0 - post.array()) * grad_post.array()).matrix();
    case Activation::tanh:
      return ((1.0 - post.array().square()) * grad_post.array()).matrix();
    case Activation::softmax: {
      Matrix delta(post.rows(), post.cols());
      for (Eigen::Index r = 0; r < post.rows(); ++r) {
        const double dot = post.row(r).dot(grad_post.row(r));
        delta.row(r) = (post.row(r).array() * (grad_post.row(r).array() - dot)).matrix();
      }
      return delta;
    }
  }
  throw ShapeError("unknown activation");
}

// dLoss/dOutput with clamp-consistent derivatives (zero where the loss is
// flat because of log clamping).
Matrix loss_grad(const Matrix& output, const Matrix& targets, Loss loss) {
  const double elems = static_cast<double>(output.rows()) * static_cast<double>(output.cols());
  switch (loss) {
    case Loss::mse:
      return (2.0 / elems) * (output - targets);
    case Loss::cross_entropy: {
      Matrix g = Matrix::Zero(output.rows(), output.cols());
      const double scale = 1.0 / static_cast<double>(output.rows());
      for (Eigen::Index i = 0; i < output.size(); ++i) {
        const double p = output.reshaped()(i);
        if (p > kLogClamp) g.reshaped()(i) = -targets.reshaped()(i) / p * scale;
      }
      return g;
    }
    case Loss::bce: {
      Matrix g = Matrix::Zero(output.rows(), output.cols());
      const double scale = 1.0 / elems;
      for (Eigen::Index i = 0; i < output.size(); ++i) {
        const double p = output.reshaped()(i);
        if (p > kLogClamp && p < 1.0 - kLogClamp) {
          const double y = targets.reshaped()(i);
          g.reshaped()(i) = (p - y) / (p * (1.0 - p)) * scale;
        }
      }
      return g;
    }
  }
  throw ShapeError("unknown loss");
}

// Chains deltas (pre-activation gradients of the final layer) down the net,
// filling grads and returning dLoss/dInput.
Matrix backprop_chain(const Mlp& net, const ForwardTrace& trace, Matrix delta,
                      Gradients& grads) {
  const std::size_t n_layers = net.layers.size();
  grads.weights.resize(n_layers);
  grads.bias.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& prev_post = (l == 0) ? trace.input : trace.post[l - 1];
    grads.weights[l] = delta.transpose() * prev_post;
    grads.bias[l] = delta.colwise().sum();
    Matrix grad_prev = delta * net.layers[l].weights;
    if (l == 0) return grad_prev;
    delta = activation_backward(net.layers[l - 1].activation, trace.pre[l - 1],
                                trace.post[l - 1], grad_prev);
  }
  return Matrix::Zero(trace.input.rows(), trace.input.cols());
}

void ensure_state(const Mlp& net, OptimizerState& state) {
  if (!state.m_weights.empty()) return;
  state.m_weights.reserve(net.layers.size());
  for (const Layer& layer : net.layers) {
    state.m_weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    state.v_weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    state.m_bias.push_back(Vector::Zero(layer.bias.size()));
    state.v_bias.push_back(Vector::Zero(layer.bias.size()));
  }
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  if (!in) throw ParseError("mlp checkpoint truncated");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

Eigen::Index Mlp::input_dim() const {
  return layers.empty() ? 0 : layers.front().weights.cols();
}

Eigen::Index Mlp::output_dim() const {
  return layers.empty() ? 0 : layers.back().weights.rows();
}

Mlp make_mlp(const std::vector<Eigen::Index>& dims,
             const std::vector<Activation>& activations, std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("make_mlp: need at least input and output dims");
  if (activations.size() != dims.size() - 1)
    throw ShapeError("make_mlp: need one activation per layer");
  Mlp net;
  net.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    const Eigen::Index fan_in = dims[l];
    const Eigen::Index fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
    layer.bias = Vector::Zero(fan_out);
    layer.activation = activations[l];
    net.layers.push_back(std::move(layer));
  }
  check_net(net);
  return net;
}

Matrix forward(const Mlp& net, const Matrix& batch) {
  return forward_trace(net, batch).output();
}

ForwardTrace forward_trace(const Mlp& net, const Matrix& batch) {
  check_net(net);
  if (batch.cols() != net.input_dim())
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, net expects " + std::to_string(net.input_dim()));
  ForwardTrace trace;
  trace.input = batch;
  trace.pre.reserve(net.layers.size());
  trace.post.reserve(net.layers.size());
  const Matrix* current = &trace.input;
  for (const Layer& layer : net.layers) {
    Matrix pre = (*current) * layer.weights.transpose();
    pre.rowwise() += layer.bias.transpose();
    trace.post.push_back(apply_activation(layer.activation, pre));
    trace.pre.push_back(std::move(pre));
    current = &trace.post.back();
  }
  return trace;
}

double loss_value(const Matrix& output, const Matrix& targets, Loss loss) {
  if (output.rows() != targets.rows() || output.cols() != targets.cols())
    throw ShapeError("loss: output and target shapes differ");
  if (output.size() == 0) return 0.0;
  const double elems = static_cast<double>(output.size());
  switch (loss) {
    case Loss::mse:
      return (output - targets).squaredNorm() / elems;
    case Loss::cross_entropy: {
      const Eigen::ArrayXXd p = output.array().max(kLogClamp);
      return -(targets.array() * p.log()).sum() / static_cast<double>(output.rows());
    }
    case Loss::bce: {
      const Eigen::ArrayXXd p = output.array().max(kLogClamp).min(1.0 - kLogClamp);
      return -((targets.array() * p.log()) + (1.0 - targets.array()) * (1.0 - p).log()).sum() / elems;
    }
  }
  throw ShapeError("unknown loss");
}

Matrix backward_loss(const Mlp& net, const ForwardTrace& trace,
                     const Matrix& targets, Loss loss, Gradients& grads) {
  const Matrix& output = trace.output();
  if (output.rows() != targets.rows() || output.cols() != targets.cols())
    throw ShapeError("backward_loss: output and target shapes differ");
  const Activation final_act = net.layers.back().activation;
  const double rows = static_cast<double>(output.rows());
  const double elems = static_cast<double>(output.size());
  Matrix delta;
  if (final_act == Activation::softmax && loss == Loss::cross_entropy) {
    delta = (output - targets) / rows;
  } else if (final_act == Activation::sigmoid && loss == Loss::bce) {
    delta = (output - targets) / elems;
  } else {
    const Matrix grad_post = loss_grad(output, targets, loss);
    delta = activation_backward(final_act, trace.pre.back(), output, grad_post);
  }
  return backprop_chain(net, trace, std::move(delta), grads);
}

Matrix backward_output(const Mlp& net, const ForwardTrace& trace,
                       const Matrix& upstream, Gradients& grads) {
  const Matrix& output = trace.output();
  if (output.rows() != upstream.rows() || output.cols() != upstream.cols())
    throw ShapeError("backward_output: upstream shape does not match output");
  Matrix delta = activation_backward(net.layers.back().activation,
                                     trace.pre.back(), output, upstream);
  return backprop_chain(net, trace, std::move(delta), grads);
}

void apply_gradients(Mlp& net, const Gradients& grads, const TrainConfig& cfg,
                     OptimizerState& state) {
  if (grads.weights.size() != net.layers.size())
    throw ShapeError("apply_gradients: gradient count does not match layer count");
  if (cfg.optimizer == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      net.layers[l].weights -= cfg.learning_rate * grads.weights[l];
      net.layers[l].bias -= cfg.learning_rate * grads.bias[l];
    }
    return;
  }
  ensure_state(net, state);
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      param.array() -=
          cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps_adam);
    };
    adam(net.layers[l].weights, state.m_weights[l], state.v_weights[l], grads.weights[l]);
    adam(net.layers[l].bias, state.m_bias[l], state.v_bias[l], grads.bias[l]);
  }
}

double train_step(Mlp& net, const Matrix& batch, const Matrix& targets,
                  Loss loss, const TrainConfig& cfg, OptimizerState& state) {
  if (batch.rows() == 0) throw ShapeError("train_step: empty batch");
  const ForwardTrace trace = forward_trace(net, batch);
  const double value = loss_value(trace.output(), targets, loss);
  if (!std::isfinite(value))
    throw TrainingError("train_step: loss diverged (non-finite)");
  Gradients grads;
  backward_loss(net, trace, targets, loss, grads);
  apply_gradients(net, grads, cfg, state);
  return value;
}

double gradient_check(const Mlp& net, const Matrix& batch,
                      const Matrix& targets, Loss loss, double h) {
  if (!(h > 1e-7 && h < 1e-3))
    throw ShapeError("gradient_check: h must lie in (1e-7, 1e-3)");
  Gradients grads;
  {
    const ForwardTrace trace = forward_trace(net, batch);
    backward_loss(net, trace, targets, loss, grads);
  }
  Mlp probe = net;
  double max_err = 0.0;
  auto probe_param = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = loss_value(forward(probe, batch), targets, loss);
    param = saved - h;
    const double down = loss_value(forward(probe, batch), targets, loss);
    param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(analytic - fd) / (std::abs(analytic) + std::abs(fd) + 1e-12);
    max_err = std::max(max_err, err);
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    Layer& layer = probe.layers[l];
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        probe_param(layer.weights(r, c), grads.weights[l](r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      probe_param(layer.bias(i), grads.bias[l](i));
  }
  return max_err;
}

void save_mlp(const Mlp& net, std::ostream& out) {
  out.write("MLP1", 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& layer : net.layers) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weights.cols()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weights.rows()));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
  }
  for (const Layer& layer : net.layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        write_le<double>(out, layer.weights(r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      write_le<double>(out, layer.bias(i));
  }
  if (!out) throw ParseError("mlp checkpoint write failed");
}

void save_mlp(const Mlp& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  save_mlp(net, out);
}

Mlp load_mlp(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MLP1", 4) != 0)
    throw ParseError("mlp checkpoint: bad magic");
  const auto n_layers = read_le<std::uint32_t>(in);
  Mlp net;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    Layer layer;
    const auto in_dim = read_le<std::uint32_t>(in);
    const auto out_dim = read_le<std::uint32_t>(in);
    const auto act = read_le<std::uint8_t>(in);
    if (act > static_cast<std::uint8_t>(Activation::softmax))
      throw ParseError("mlp checkpoint: bad activation tag");
    layer.weights.resize(out_dim, in_dim);
    layer.bias.resize(out_dim);
    layer.activation = static_cast<Activation>(act);
    net.layers.push_back(std::move(layer));
  }
  for (Layer& layer : net.layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        layer.weights(r, c) = read_le<double>(in);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      layer.bias(i) = read_le<double>(in);
  }
  check_net(net);
  return net;
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return load_mlp(in);
}

}  // namespace latexplain
