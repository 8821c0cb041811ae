#pragma once

// Deterministic parallel index loop.  Callers write result i into slot i of
// a pre-sized container, so output never depends on scheduling; if several
// indices throw, the exception from the smallest index wins (again for
// scheduling independence).

#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace spikeslab {

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

template <typename Fn>
void parallel_for(long count, int workers, Fn&& fn) {
  if (count <= 0) return;
  workers = resolve_workers(workers);
  if (workers > count) workers = static_cast<int>(count);
  if (workers <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::mutex error_mutex;
  long error_index = std::numeric_limits<long>::max();
  std::exception_ptr error;
  auto work = [&] {
    for (;;) {
      const long i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace spikeslab
