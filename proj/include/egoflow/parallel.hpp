// Minimal thread-pool-free parallel loop.
//
// Work items must write only to their own output slots; with that discipline
// results are identical for any thread count, which the training loop relies
// on for run-to-run determinism.
#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace egoflow {

// Effective worker count: explicit request > 0, else the EGOFLOW_THREADS
// environment variable, else hardware concurrency.
inline int resolve_thread_count(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EGOFLOW_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(index, worker_id) for every index in [0, count).  worker_id is in
// [0, threads) and can key per-thread scratch buffers.  Exceptions from
// workers are rethrown on the calling thread (first one wins).
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t, int)>& fn,
                         int threads = 0) {
  int n_threads = resolve_thread_count(threads);
  if (n_threads > static_cast<int>(count)) n_threads = static_cast<int>(count);
  if (count == 0) return;
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i, 0);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&](int worker_id) {
    while (!failed.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) break;
      try {
        fn(i, worker_id);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        break;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(n_threads - 1);
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace egoflow
