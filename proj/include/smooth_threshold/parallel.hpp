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

namespace smooth_threshold {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each task must
// write only to its own output slot; results therefore never depend on the
// worker count or on scheduling order. The first exception is rethrown.
template<class F>
void
parallel_for(std::size_t count, unsigned threads, F&& fn)
{
  const std::size_t workers =
    std::min<std::size_t>(std::max(threads, 1u), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }

  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w)
    pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure)
    std::rethrow_exception(failure);
}

//! Thread count from SMOOTH_THRESHOLD_THREADS, or 1.
inline unsigned
default_threads()
{
  if (const char* env = std::getenv("SMOOTH_THRESHOLD_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0)
        return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return 1;
}

} // namespace smooth_threshold
