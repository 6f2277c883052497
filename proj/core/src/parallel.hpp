#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace advtok::detail {

/// Runs fn(i) for i in [0, count) across `workers` threads with strided
/// assignment. Output order is the caller's responsibility (each i writes its
/// own slot), so worker count never affects results.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const auto n_threads = static_cast<std::size_t>(workers);
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t w = 0; w < n_threads; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += n_threads) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace advtok::detail
