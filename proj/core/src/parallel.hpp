#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace bmwf::detail {

// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must only
// write to slot i of its outputs, and must not throw.
template <class Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  const int pool = std::clamp(workers, 1, std::max(n, 1));
  if (pool == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (int t = 0; t < pool; ++t) {
    threads.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace bmwf::detail
