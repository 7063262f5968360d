// Deterministic synthetic digit corpus in IDX format: seven-segment glyphs
// with random affine jitter and soft strokes, 28x28 grayscale. Stands in for
// the standard handwritten-digit files when those are not on disk; the
// ingest command reads either.
#include "latexplain/common.hpp"
#include "latexplain/dataset.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <vector>

namespace {

using latexplain::Matrix;

struct Segment {
  double x0, y0, x1, y1;
};

// Classic seven-segment layout on the unit square.
const std::array<Segment, 7> kSegments = {{
    {0.25, 0.15, 0.75, 0.15},  // A top
    {0.75, 0.15, 0.75, 0.50},  // B upper right
    {0.75, 0.50, 0.75, 0.85},  // C lower right
    {0.25, 0.85, 0.75, 0.85},  // D bottom
    {0.25, 0.50, 0.25, 0.85},  // E lower left
    {0.25, 0.15, 0.25, 0.50},  // F upper left
    {0.25, 0.50, 0.75, 0.50},  // G middle
}};

const std::array<unsigned, 10> kDigitMasks = {{
    0b1111110,  // 0: ABCDEF
    0b0110000,  // 1: BC
    0b1101101,  // 2: ABDEG
    0b1111001,  // 3: ABCDG
    0b0110011,  // 4: BCFG
    0b1011011,  // 5: ACDFG
    0b1011111,  // 6: ACDEFG
    0b1110000,  // 7: ABC
    0b1111111,  // 8
    0b1111011,  // 9: ABCDFG
}};

double segment_distance(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len_sq = dx * dx + dy * dy;
  double t = len_sq == 0.0 ? 0.0 : ((px - s.x0) * dx + (py - s.y0) * dy) / len_sq;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = s.x0 + t * dx, cy = s.y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

latexplain::Image render_digit(int digit, std::mt19937_64& rng, int side) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = (unit(rng) - 0.5) * 0.5;        // +-0.25 rad
  const double scale = 0.85 + unit(rng) * 0.3;
  const double shear = (unit(rng) - 0.5) * 0.3;
  const double tx = (unit(rng) - 0.5) * 0.15;
  const double ty = (unit(rng) - 0.5) * 0.15;
  const double width = 0.05 + unit(rng) * 0.04;
  const double gain = 0.8 + unit(rng) * 0.2;

  const double ca = std::cos(angle), sa = std::sin(angle);
  // Inverse map from image coordinates back to glyph coordinates.
  auto to_glyph = [&](double x, double y, double* gx, double* gy) {
    double ux = x - 0.5 - tx, uy = y - 0.5 - ty;
    double rx = (ca * ux + sa * uy) / scale;
    double ry = (-sa * ux + ca * uy) / scale;
    rx -= shear * ry;
    *gx = rx + 0.5;
    *gy = ry + 0.5;
  };

  const unsigned mask = kDigitMasks[static_cast<std::size_t>(digit)];
  latexplain::Image img(static_cast<Eigen::Index>(side) * side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double x = (c + 0.5) / side, y = (r + 0.5) / side;
      double gx = 0.0, gy = 0.0;
      to_glyph(x, y, &gx, &gy);
      double best = 1e9;
      for (std::size_t s = 0; s < kSegments.size(); ++s)
        if (mask & (1u << (6 - s)))
          best = std::min(best, segment_distance(gx, gy, kSegments[s]));
      const double v = gain * std::exp(-(best * best) / (2.0 * width * width));
      img(static_cast<Eigen::Index>(r) * side + c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic seven-segment digit corpus writer (IDX format)"};
  int count = 10000;
  int side = 28;
  std::uint64_t seed = 7;
  std::string out_dir = ".";
  std::string stem = "digits";
  app.add_option("--count", count, "number of images")->check(CLI::PositiveNumber);
  app.add_option("--side", side, "image side length")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--stem", stem, "file stem: <stem>-images.idx, <stem>-labels.idx");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    Matrix images(count, static_cast<Eigen::Index>(side) * side);
    std::vector<latexplain::Label> labels(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const int digit = i % 10;
      std::mt19937_64 rng(latexplain::derive_seed(seed, "synthdigits/" + std::to_string(i)));
      images.row(i) = render_digit(digit, rng, side).transpose();
      labels[static_cast<std::size_t>(i)] = digit;
    }
    const auto base = std::filesystem::path(out_dir) / stem;
    latexplain::write_idx_images(base.string() + "-images.idx", images, side, side);
    latexplain::write_idx_labels(base.string() + "-labels.idx", labels);
    std::cout << "wrote " << count << " " << side << "x" << side << " images under "
              << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "synthdigits: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
