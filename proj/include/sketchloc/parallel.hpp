#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace sketchloc {

/// Splits [0, n) into `workers` contiguous chunks and runs fn(begin, end, worker)
/// on each. Chunk boundaries depend only on n and workers.
template <typename Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2 * w) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(w - 1);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t k = 1; k < w; ++k) {
    const std::size_t b = std::min(n, k * chunk);
    const std::size_t e = std::min(n, b + chunk);
    threads.emplace_back([&fn, b, e, k] { fn(b, e, k); });
  }
  fn(std::size_t{0}, std::min(n, chunk), std::size_t{0});
}

}  // namespace sketchloc
