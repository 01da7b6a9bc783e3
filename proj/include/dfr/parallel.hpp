#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace dfr {

// Runs body(i) for i in [0, n). Each index owns its output slot, so results
// are identical for any thread count; only wall time changes.
template <class F>
void parallel_for(int n, int threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  int k = std::min(threads, n);
  pool.reserve(k);
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace dfr
