#include "latexplain/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace latexplain {

std::uint64_t fnv1a64_bytes(const void* data, std::size_t size, std::uint64_t state) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state ^= bytes[i];
    state *= 0x100000001b3ull;
  }
  return state;
}

std::uint64_t fnv1a64(std::string_view data) {
  return fnv1a64_bytes(data.data(), data.size());
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream) {
  return global_seed ^ fnv1a64(stream);
}

int thread_cap() {
  if (const char* env = std::getenv("LATEXPLAIN_THREADS")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
  if (n <= 0) return;
  const int threads = std::min<std::int64_t>(thread_cap(), n);
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::int64_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (std::int64_t i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace latexplain
