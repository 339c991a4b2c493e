#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tdfdr {

//! Global cap on worker threads (the CLI --threads flag). 0 means
//! "use hardware concurrency". Results never depend on this value;
//! every parallel loop writes to per-index slots and draws randomness
//! from per-index streams.
inline std::atomic<std::size_t>& max_threads_setting() {
  static std::atomic<std::size_t> value{0};
  return value;
}

inline void set_max_threads(std::size_t n) { max_threads_setting().store(n); }

inline std::size_t max_threads() {
  std::size_t n = max_threads_setting().load();
  if (n == 0) {
    n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
  }
  return n;
}

//! Run body(i) for i in [0, n) on up to max_threads() workers.
//! Work is claimed via an atomic counter; the first exception thrown by
//! any worker is rethrown on the caller once all workers have joined.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto run = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();

  if (error) std::rethrow_exception(error);
}

} // namespace tdfdr
