#include "latexplain/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace latexplain {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > buf.size())
    throw ParseError(path + ": truncated at offset " + std::to_string(offset));
  return (static_cast<std::uint32_t>(buf[offset]) << 24) |
         (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
         static_cast<std::uint32_t>(buf[offset + 3]);
}

void write_be32(std::ostream& out, std::uint32_t value) {
  const char bytes[4] = {static_cast<char>(value >> 24), static_cast<char>(value >> 16),
                         static_cast<char>(value >> 8), static_cast<char>(value)};
  out.write(bytes, 4);
}

template <typename T>
void write_le(std::ostream& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  if (!in) throw ParseError(path + ": truncated");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img_buf = read_all(images_path);
  if (read_be32(img_buf, 0, images_path) != kIdxImagesMagic)
    throw ParseError(images_path + ": bad magic at offset 0");
  const std::uint32_t count = read_be32(img_buf, 4, images_path);
  const std::uint32_t rows = read_be32(img_buf, 8, images_path);
  const std::uint32_t cols = read_be32(img_buf, 12, images_path);
  const std::size_t expected = 16 + static_cast<std::size_t>(count) * rows * cols;
  if (img_buf.size() < expected)
    throw ParseError(images_path + ": truncated at offset " + std::to_string(img_buf.size()));

  const auto lab_buf = read_all(labels_path);
  if (read_be32(lab_buf, 0, labels_path) != kIdxLabelsMagic)
    throw ParseError(labels_path + ": bad magic at offset 0");
  const std::uint32_t lab_count = read_be32(lab_buf, 4, labels_path);
  if (lab_count != count)
    throw ParseError(labels_path + ": label count " + std::to_string(lab_count) +
                     " does not match image count " + std::to_string(count));
  if (lab_buf.size() < 8 + static_cast<std::size_t>(count))
    throw ParseError(labels_path + ": truncated at offset " + std::to_string(lab_buf.size()));

  Dataset data;
  data.rows = static_cast<int>(rows);
  data.cols = static_cast<int>(cols);
  data.images.resize(count, static_cast<Eigen::Index>(rows) * cols);
  data.labels.resize(count);
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  for (std::uint32_t i = 0; i < count; ++i) {
    const unsigned char* src = img_buf.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p)
      data.images(i, static_cast<Eigen::Index>(p)) = src[p] / 255.0;
    data.labels[i] = static_cast<Label>(lab_buf[8 + i]);
  }
  return data;
}

void write_idx_images(const std::string& path, const Matrix& images, int rows, int cols) {
  if (images.cols() != static_cast<Eigen::Index>(rows) * cols)
    throw ShapeError("write_idx_images: pixel count does not match rows*cols");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.rows()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < images.rows(); ++i)
    for (Eigen::Index p = 0; p < images.cols(); ++p)
      out.put(static_cast<char>(to_byte(images(i, p))));
  if (!out) throw ParseError(path + ": write failed");
}

void write_idx_labels(const std::string& path, const std::vector<Label>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (Label l : labels) out.put(static_cast<char>(static_cast<unsigned char>(l)));
  if (!out) throw ParseError(path + ": write failed");
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out.write("LXD1", 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.rows));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.cols));
  for (Label l : data.labels) out.put(static_cast<char>(static_cast<unsigned char>(l)));
  for (Eigen::Index i = 0; i < data.images.rows(); ++i)
    for (Eigen::Index p = 0; p < data.images.cols(); ++p)
      out.put(static_cast<char>(to_byte(data.images(i, p))));
  if (!out) throw ParseError(path + ": write failed");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LXD1", 4) != 0)
    throw ParseError(path + ": bad magic at offset 0");
  const auto count = read_le<std::uint32_t>(in, path);
  const auto rows = read_le<std::uint32_t>(in, path);
  const auto cols = read_le<std::uint32_t>(in, path);
  Dataset data;
  data.rows = static_cast<int>(rows);
  data.cols = static_cast<int>(cols);
  data.labels.resize(count);
  data.images.resize(count, static_cast<Eigen::Index>(rows) * cols);
  std::vector<char> buf(count);
  in.read(buf.data(), count);
  if (!in) throw ParseError(path + ": truncated labels");
  for (std::uint32_t i = 0; i < count; ++i)
    data.labels[i] = static_cast<Label>(static_cast<unsigned char>(buf[i]));
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<char> img(pixels);
  for (std::uint32_t i = 0; i < count; ++i) {
    in.read(img.data(), static_cast<std::streamsize>(pixels));
    if (!in) throw ParseError(path + ": truncated images");
    for (std::size_t p = 0; p < pixels; ++p)
      data.images(i, static_cast<Eigen::Index>(p)) =
          static_cast<unsigned char>(img[p]) / 255.0;
  }
  return data;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(Eigen::Index count,
                                                            double train_fraction,
                                                            std::uint64_t seed) {
  if (train_fraction < 0.0 || train_fraction > 1.0)
    throw ConfigError("split fraction must lie in [0,1]");
  std::vector<int> indices(count);
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(indices.begin(), indices.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  std::vector<int> train(indices.begin(), indices.begin() + cut);
  std::vector<int> test(indices.begin() + cut, indices.end());
  return {std::move(train), std::move(test)};
}

Dataset subset(const Dataset& data, const std::vector<int>& indices) {
  Dataset out;
  out.rows = data.rows;
  out.cols = data.cols;
  out.images.resize(static_cast<Eigen::Index>(indices.size()), data.images.cols());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.images.row(static_cast<Eigen::Index>(i)) = data.images.row(indices[i]);
    out.labels[i] = data.labels[indices[i]];
  }
  return out;
}

void write_pgm(const std::string& path, const Image& image, int rows, int cols) {
  if (image.size() != static_cast<Eigen::Index>(rows) * cols)
    throw ShapeError("write_pgm: pixel count does not match rows*cols");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << "P5\n" << cols << " " << rows << "\n255\n";
  for (Eigen::Index p = 0; p < image.size(); ++p)
    out.put(static_cast<char>(to_byte(image(p))));
  if (!out) throw ParseError(path + ": write failed");
}

Image read_pgm(const std::string& path, int* rows, int* cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255)
    throw ParseError(path + ": not a maxval-255 binary PGM");
  in.get();  // single whitespace after header
  Image image(static_cast<Eigen::Index>(w) * h);
  for (Eigen::Index p = 0; p < image.size(); ++p) {
    const int byte = in.get();
    if (byte == EOF) throw ParseError(path + ": truncated pixel data");
    image(p) = byte / 255.0;
  }
  if (rows) *rows = h;
  if (cols) *cols = w;
  return image;
}

}  // namespace latexplain
