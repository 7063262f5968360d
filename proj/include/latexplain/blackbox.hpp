#pragma once

#include "latexplain/common.hpp"
#include "latexplain/mlp.hpp"

#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace latexplain {

// Uniform query interface to the classifier being explained. Either a
// built-in Mlp, or an external process driven through request/response
// files. classify is pure: the same batch always yields the same labels.
struct BlackBox {
  std::optional<Mlp> classifier;  // builtin when set
  std::string command_template;   // external: must contain {req} and {resp}
  std::string workdir;            // where the oracle files are written
  Eigen::Index n = 0;
  int num_classes = 0;
  std::shared_ptr<std::mutex> oracle_lock;  // serializes external invocations

  bool is_builtin() const { return classifier.has_value(); }
};

BlackBox make_builtin_blackbox(Mlp classifier, int num_classes);
BlackBox make_external_blackbox(std::string command_template, Eigen::Index n,
                                int num_classes, std::string workdir);

// One label per image, order preserving. Builtin labels are the argmax of
// the net output, ties broken toward the lowest class index.
std::vector<Label> classify(const BlackBox& bb, const Matrix& batch);
Label classify_one(const BlackBox& bb, const Image& x);

// Oracle request file: 16-byte header (magic "XBB1", little-endian u64 row
// count, u32 pixel count), then rows*pixels little-endian f32 values.
// Response file: one little-endian i32 label per row.
void write_oracle_request(std::ostream& out, const Matrix& batch);
Matrix read_oracle_request(std::istream& in);
void write_oracle_response(std::ostream& out, const std::vector<Label>& labels);
std::vector<Label> read_oracle_response(std::istream& in, Eigen::Index expected);

struct BlackBoxTrainReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  Eigen::Index train_count = 0;
  Eigen::Index test_count = 0;
};

// Trains the built-in classifier (softmax head, cross-entropy) on a seeded
// train/holdout split and reports accuracy on both parts.
BlackBox train_builtin(const Matrix& images, const std::vector<Label>& labels,
                       int num_classes, const std::vector<Eigen::Index>& hidden,
                       const TrainConfig& cfg, double holdout_fraction,
                       BlackBoxTrainReport* report = nullptr);

}  // namespace latexplain
