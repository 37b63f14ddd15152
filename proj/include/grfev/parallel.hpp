#pragma once

// Minimal fork-join helper. Units of work write into their own slot, so
// results are reduced in index order and the outcome does not depend on the
// worker count. Thread budget comes from GRFEV_THREADS, else the hardware.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace grfev {

inline unsigned thread_budget() {
  if (const char* env = std::getenv("GRFEV_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return unsigned(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
  unsigned workers = std::min<std::size_t>(thread_budget(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error = nullptr;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace grfev
