#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace quantlearn {

/// Worker count: QUANTLEARN_THREADS if set to a positive integer, else the
/// hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("QUANTLEARN_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

/// Calls fn(i) for i in [0, n). Each index runs exactly once; callers write
/// results into per-index slots so the outcome does not depend on scheduling.
/// The first exception thrown by any call is rethrown on the calling thread.
/// Nested calls run serially on the worker that issued them.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = detail::inside_parallel_region ? 1 : std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    const bool outer = detail::inside_parallel_region;
    detail::inside_parallel_region = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
    detail::inside_parallel_region = outer;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace quantlearn
