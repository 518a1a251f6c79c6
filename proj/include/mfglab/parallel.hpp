#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mfglab {

// Runs body(i) for i in [0, n) on up to `workers` threads. Indices are claimed dynamically;
// results must be written to per-index slots so the outcome does not depend on scheduling.
// The first exception thrown (lowest index) is rethrown after all threads join.
template <class Body>
void parallel_for(int n, int workers, Body&& body) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  int failed_at = n;
  std::exception_ptr err;
  auto run = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_at) {
          failed_at = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace mfglab
