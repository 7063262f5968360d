#pragma once

#include "latexplain/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace latexplain {

// Images as rows of a matrix, pixel intensities already scaled to [0,1].
struct Dataset {
  int rows = 0;
  int cols = 0;
  Matrix images;              // count x (rows*cols)
  std::vector<Label> labels;  // count

  Eigen::Index size() const { return images.rows(); }
  Eigen::Index pixel_count() const { return static_cast<Eigen::Index>(rows) * cols; }
  Image image(Eigen::Index i) const { return images.row(i).transpose(); }
};

// Standard IDX files (magic 0x00000803 for images, 0x00000801 for labels).
// Parse errors carry the byte offset of the failure.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

void write_idx_images(const std::string& path, const Matrix& images, int rows, int cols);
void write_idx_labels(const std::string& path, const std::vector<Label>& labels);

// Internal dataset file: magic "LXD1", little-endian u32 count/rows/cols,
// u8 labels, then u8 pixels (count*rows*cols, row-major).
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

// Seeded shuffle, then the first fraction of the indices is the train part.
std::pair<std::vector<int>, std::vector<int>> split_indices(Eigen::Index count,
                                                            double train_fraction,
                                                            std::uint64_t seed);

Dataset subset(const Dataset& data, const std::vector<int>& indices);

// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, const Image& image, int rows, int cols);
Image read_pgm(const std::string& path, int* rows = nullptr, int* cols = nullptr);

}  // namespace latexplain
