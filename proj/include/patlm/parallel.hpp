#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace patlm {

// Splits [0, n) into contiguous chunks, one per worker; fn(begin, end, worker).
// Runs inline when threads <= 1.
template <typename Fn>
void parallel_chunks(size_t n, int threads, Fn&& fn) {
  const size_t workers = std::max<size_t>(1, std::min<size_t>(static_cast<size_t>(std::max(threads, 1)), n));
  if (workers <= 1) {
    fn(size_t{0}, n, size_t{0});
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    const size_t begin = w * chunk;
    const size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
  }
  for (auto& t : pool) t.join();
}

inline int worker_count(size_t n, int threads) {
  return static_cast<int>(std::max<size_t>(1, std::min<size_t>(static_cast<size_t>(std::max(threads, 1)), n)));
}

}  // namespace patlm
