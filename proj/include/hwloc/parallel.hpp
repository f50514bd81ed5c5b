#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace hwloc {

// Runs fn(begin, end) over contiguous chunks of [0, n). threads <= 0 means
// hardware concurrency. Chunks never share an index, so callers writing only
// their own slots get identical results for any thread count.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (n <= 0) return;
  int t = threads > 0 ? threads
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  t = std::min(t, n);
  if (t == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(t);
  const int chunk = (n + t - 1) / t;
  for (int k = 0; k < t; ++k) {
    const int begin = k * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace hwloc
