#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace curvflow {

/// Worker count: CURVFLOW_THREADS caps hardware concurrency, 0 or unset means
/// all cores.
inline int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("CURVFLOW_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) hw = std::min<long>(hw, cap);
  }
  return hw;
}

/// Run fn(i) for i in [0, count) across a worker pool.  Callers write results
/// into slot i only, so the output is independent of scheduling; the first
/// exception is rethrown on the calling thread.
inline void parallel_for(long count, const std::function<void(long)>& fn) {
  const int workers = std::min<long>(worker_count(), std::max<long>(count, 1));
  if (workers <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex errorLock;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> hold(errorLock);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace curvflow
