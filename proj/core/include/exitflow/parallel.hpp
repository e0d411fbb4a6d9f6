#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace exitflow {

/// Static block partition of [0, n) over at most `threads` workers.
/// Results must be written to disjoint indices; merges stay deterministic
/// regardless of the thread count.
inline void parallel_for(int n, int threads, const std::function<void(int, int)>& body) {
  if (n <= 0) return;
  int workers = std::max(1, threads);
  workers = std::min(workers, n);
  if (workers == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(body, lo, hi);
  }
  for (auto& t : pool) t.join();
}

inline int default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace exitflow
