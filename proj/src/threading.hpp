#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

#include "tenkit/tensor.hpp"

namespace tenkit::detail {

/// Worker count from TENKIT_NUM_THREADS; defaults to 1. Read on every call
/// so the setting can change between operations.
inline int num_threads() {
  const char* env = std::getenv("TENKIT_NUM_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v < 1 ? 1 : v;
}

/// Run fn(chunk, lo, hi) over a partition of [0, n) into nt chunks.
/// The last chunk runs on the calling thread.
template <class Fn>
void parallel_chunks(index_t n, int nt, Fn&& fn) {
  if (nt > n) nt = static_cast<int>(n);
  if (nt < 1) nt = 1;
  if (nt == 1) {
    fn(0, index_t{0}, n);
    return;
  }
  const index_t base = n / nt, extra = n % nt;
  std::vector<std::thread> workers;
  index_t lo = 0;
  for (int c = 0; c < nt; ++c) {
    const index_t hi = lo + base + (c < extra ? 1 : 0);
    if (c == nt - 1) {
      fn(c, lo, hi);
    } else {
      workers.emplace_back([&fn, c, lo, hi] { fn(c, lo, hi); });
    }
    lo = hi;
  }
  for (auto& w : workers) w.join();
}

}  // namespace tenkit::detail
