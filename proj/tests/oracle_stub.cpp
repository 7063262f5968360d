// Minimal external oracle used by the blackbox tests: labels an image 1 when
// its first pixel exceeds 0.5, else 0.
#include "latexplain/blackbox.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: oracle_stub <request> <response>\n";
    return 2;
  }
  try {
    std::ifstream in(argv[1], std::ios::binary);
    const latexplain::Matrix batch = latexplain::read_oracle_request(in);
    std::vector<latexplain::Label> labels;
    labels.reserve(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
      labels.push_back(batch(r, 0) > 0.5 ? 1 : 0);
    std::ofstream out(argv[2], std::ios::binary);
    latexplain::write_oracle_response(out, labels);
  } catch (const std::exception& e) {
    std::cerr << "oracle_stub: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
