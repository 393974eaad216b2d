#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hallucheck {

/// Runs fn(i) for i in [0, n) on at most `bound` threads. Returns one
/// exception_ptr per index (null on success); the caller decides what a
/// failure means. Used for I/O-bound LLM fan-out, not numeric kernels.
template <typename Fn>
std::vector<std::exception_ptr> parallel_for_bounded(std::size_t n, std::size_t bound, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(bound, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
    return errors;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
  }
  return errors;
}

}  // namespace hallucheck
