#include "latexplain/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace latexplain {

namespace {

Label argmax_row(const Matrix& out, Eigen::Index row) {
  Label best = 0;
  double best_value = out(row, 0);
  for (Eigen::Index c = 1; c < out.cols(); ++c) {
    if (out(row, c) > best_value) {
      best_value = out(row, c);
      best = static_cast<Label>(c);
    }
  }
  return best;
}

std::string substitute(const std::string& tmpl, const std::string& req,
                       const std::string& resp) {
  std::string cmd = tmpl;
  auto replace_all = [&cmd](const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = cmd.find(from, pos)) != std::string::npos) {
      cmd.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("{req}", req);
  replace_all("{resp}", resp);
  return cmd;
}

std::vector<Label> classify_external(const BlackBox& bb, const Matrix& batch) {
  std::lock_guard<std::mutex> guard(*bb.oracle_lock);
  namespace fs = std::filesystem;
  fs::create_directories(bb.workdir);
  const std::string req = (fs::path(bb.workdir) / "oracle_req.bin").string();
  const std::string resp = (fs::path(bb.workdir) / "oracle_resp.bin").string();
  {
    std::ofstream out(req, std::ios::binary);
    if (!out) throw OracleError("oracle: cannot write request file " + req);
    write_oracle_request(out, batch);
  }
  std::error_code ec;
  fs::remove(resp, ec);
  const std::string cmd = substitute(bb.command_template, req, resp);
  const int rc = std::system(cmd.c_str());
  if (rc != 0)
    throw OracleError("oracle: command failed with status " + std::to_string(rc) + ": " + cmd);
  std::ifstream in(resp, std::ios::binary);
  if (!in) throw OracleError("oracle: no response file at " + resp + " after: " + cmd);
  std::vector<Label> labels = read_oracle_response(in, batch.rows());
  for (Label l : labels)
    if (l < 0 || l >= bb.num_classes)
      throw OracleError("oracle: label " + std::to_string(l) + " outside [0," +
                        std::to_string(bb.num_classes) + ")");
  return labels;
}

double accuracy(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
  if (predicted.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace

BlackBox make_builtin_blackbox(Mlp classifier, int num_classes) {
  BlackBox bb;
  bb.n = classifier.input_dim();
  bb.num_classes = num_classes;
  if (classifier.output_dim() != num_classes)
    throw ShapeError("blackbox: classifier output dim does not match class count");
  bb.classifier = std::move(classifier);
  return bb;
}

BlackBox make_external_blackbox(std::string command_template, Eigen::Index n,
                                int num_classes, std::string workdir) {
  if (command_template.find("{req}") == std::string::npos ||
      command_template.find("{resp}") == std::string::npos)
    throw ConfigError("external blackbox: command template needs {req} and {resp}");
  BlackBox bb;
  bb.command_template = std::move(command_template);
  bb.workdir = std::move(workdir);
  bb.n = n;
  bb.num_classes = num_classes;
  bb.oracle_lock = std::make_shared<std::mutex>();
  return bb;
}

std::vector<Label> classify(const BlackBox& bb, const Matrix& batch) {
  if (batch.rows() == 0) return {};
  if (batch.cols() != bb.n)
    throw ShapeError("classify: image has " + std::to_string(batch.cols()) +
                     " pixels, black box expects " + std::to_string(bb.n));
  if (bb.is_builtin()) {
    const Matrix out = forward(*bb.classifier, batch);
    std::vector<Label> labels(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
      labels[static_cast<std::size_t>(r)] = argmax_row(out, r);
    return labels;
  }
  return classify_external(bb, batch);
}

Label classify_one(const BlackBox& bb, const Image& x) {
  return classify(bb, x.transpose())[0];
}

void write_oracle_request(std::ostream& out, const Matrix& batch) {
  out.write("XBB1", 4);
  const std::uint64_t rows = static_cast<std::uint64_t>(batch.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(batch.cols());
  char header[12];
  std::memcpy(header, &rows, 8);
  std::memcpy(header + 8, &cols, 4);
  out.write(header, 12);
  for (Eigen::Index r = 0; r < batch.rows(); ++r)
    for (Eigen::Index c = 0; c < batch.cols(); ++c) {
      const float v = static_cast<float>(batch(r, c));
      char buf[4];
      std::memcpy(buf, &v, 4);
      out.write(buf, 4);
    }
  if (!out) throw OracleError("oracle: request write failed");
}

Matrix read_oracle_request(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "XBB1", 4) != 0)
    throw OracleError("oracle request: bad magic");
  char header[12];
  in.read(header, 12);
  if (!in) throw OracleError("oracle request: truncated header");
  std::uint64_t rows = 0;
  std::uint32_t cols = 0;
  std::memcpy(&rows, header, 8);
  std::memcpy(&cols, header + 8, 4);
  Matrix batch(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < batch.rows(); ++r)
    for (Eigen::Index c = 0; c < batch.cols(); ++c) {
      char buf[4];
      in.read(buf, 4);
      if (!in) throw OracleError("oracle request: truncated payload");
      float v = 0.0f;
      std::memcpy(&v, buf, 4);
      batch(r, c) = static_cast<double>(v);
    }
  return batch;
}

void write_oracle_response(std::ostream& out, const std::vector<Label>& labels) {
  for (Label l : labels) {
    const std::int32_t v = static_cast<std::int32_t>(l);
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
  }
  if (!out) throw OracleError("oracle: response write failed");
}

std::vector<Label> read_oracle_response(std::istream& in, Eigen::Index expected) {
  std::vector<Label> labels;
  labels.reserve(static_cast<std::size_t>(expected));
  for (Eigen::Index i = 0; i < expected; ++i) {
    char buf[4];
    in.read(buf, 4);
    if (!in)
      throw OracleError("oracle response: expected " + std::to_string(expected) +
                        " labels, got " + std::to_string(i));
    std::int32_t v = 0;
    std::memcpy(&v, buf, 4);
    labels.push_back(static_cast<Label>(v));
  }
  return labels;
}

BlackBox train_builtin(const Matrix& images, const std::vector<Label>& labels,
                       int num_classes, const std::vector<Eigen::Index>& hidden,
                       const TrainConfig& cfg, double holdout_fraction,
                       BlackBoxTrainReport* report) {
  if (images.rows() == 0) throw TrainingError("train_builtin: empty dataset");
  if (images.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("train_builtin: image and label counts differ");
  for (Label l : labels)
    if (l < 0 || l >= num_classes)
      throw ShapeError("train_builtin: label " + std::to_string(l) + " outside [0," +
                       std::to_string(num_classes) + ")");

  std::vector<Eigen::Index> dims{images.cols()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(num_classes);
  std::vector<Activation> acts(hidden.size(), Activation::relu);
  acts.push_back(Activation::softmax);
  Mlp net = make_mlp(dims, acts, derive_seed(cfg.seed, "blackbox/init"));

  std::mt19937_64 rng(derive_seed(cfg.seed, "blackbox/train"));
  std::vector<int> order(static_cast<std::size_t>(images.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto holdout = static_cast<std::size_t>(
      std::llround(holdout_fraction * static_cast<double>(order.size())));
  const std::size_t train_count = order.size() - holdout;
  if (train_count == 0) throw TrainingError("train_builtin: holdout leaves no training data");

  OptimizerState state;
  const int batch_size = std::max(1, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count), rng);
    for (std::size_t start = 0; start < train_count; start += batch_size) {
      const std::size_t b = std::min<std::size_t>(batch_size, train_count - start);
      Matrix batch(static_cast<Eigen::Index>(b), images.cols());
      Matrix targets = Matrix::Zero(static_cast<Eigen::Index>(b), num_classes);
      for (std::size_t i = 0; i < b; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = images.row(order[start + i]);
        targets(static_cast<Eigen::Index>(i), labels[static_cast<std::size_t>(order[start + i])]) = 1.0;
      }
      const double loss = train_step(net, batch, targets, Loss::cross_entropy, cfg, state);
      if (!std::isfinite(loss)) throw TrainingError("train_builtin: loss diverged");
    }
  }

  BlackBox bb = make_builtin_blackbox(std::move(net), num_classes);
  if (report) {
    auto eval = [&](std::size_t begin, std::size_t end, double* acc, Eigen::Index* count) {
      *count = static_cast<Eigen::Index>(end - begin);
      if (begin == end) {
        *acc = 0.0;
        return;
      }
      Matrix part(static_cast<Eigen::Index>(end - begin), images.cols());
      std::vector<Label> truth(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        part.row(static_cast<Eigen::Index>(i - begin)) = images.row(order[i]);
        truth[i - begin] = labels[static_cast<std::size_t>(order[i])];
      }
      *acc = accuracy(classify(bb, part), truth);
    };
    eval(0, train_count, &report->train_accuracy, &report->train_count);
    eval(train_count, order.size(), &report->test_accuracy, &report->test_count);
  }
  return bb;
}

}  // namespace latexplain
