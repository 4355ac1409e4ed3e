#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace mbrot {

/// Calls body(k) for every k in [0, count) on up to `workers` threads.
/// Work is handed out through a shared counter, so completion order is
/// arbitrary; callers write results into slot k to stay deterministic.
/// `body` must not throw.
template <typename Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1))
        body(k);
    });
  }
}

}  // namespace mbrot
