// Coarse-grained parallel_for honoring the MMDIFF_NUM_THREADS cap.
// Chunk results are merged in index order so reductions stay deterministic
// regardless of thread count.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mmdiff {

inline int num_threads() {
  if (const char* env = std::getenv("MMDIFF_NUM_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Runs fn(begin, end) over contiguous chunks of [0, n). fn must not touch
// shared mutable state except through per-chunk slots owned by the caller.
inline void parallel_for(long n, const std::function<void(long, long)>& fn) {
  if (n <= 0) return;
  int nt = std::min<long>(num_threads(), n);
  if (nt <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(nt);
  long chunk = (n + nt - 1) / nt;
  for (int k = 0; k < nt; ++k) {
    long b = k * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    workers.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace mmdiff
