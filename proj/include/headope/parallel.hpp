#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace headope {

// Index-parallel loop with results written into caller-owned slots, so
// output is identical for any worker count.
inline void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const auto n_workers = static_cast<size_t>(threads);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w]() {
      for (size_t i = w; i < n; i += n_workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace headope
