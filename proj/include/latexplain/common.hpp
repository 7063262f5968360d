#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace latexplain {

// Row-major throughout: a batch is one sample per row, pixels/features as
// columns, matching the on-disk layouts (checkpoints, oracle files).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Flat vector of n pixel intensities in [0,1].
using Image = Eigen::VectorXd;
// Point in the k-dimensional latent feature space, k << n.
using LatentPoint = Eigen::VectorXd;
// Class index in [0, num_classes).
using Label = int;

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};
struct ShapeError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};
struct OracleError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// FNV-1a, used for seed fan-out and artifact hashing. Stable across builds,
// unlike std::hash.
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t fnv1a64_bytes(const void* data, std::size_t size, std::uint64_t state = 0xcbf29ce484222325ull);

// Named-stream seed derivation: adding a component never shifts the
// randomness of the others.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream);

// Parallelism cap from LATEXPLAIN_THREADS (>=1); defaults to the hardware
// concurrency.
int thread_cap();

// Runs body(i) for i in [0, n). Work items must be independent and write only
// to their own slot so the result does not depend on the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

}  // namespace latexplain
