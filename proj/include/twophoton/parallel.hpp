#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "twophoton/types.hpp"

namespace twophoton {

// Runs fn(i) for i in [0, n) on up to `threads` workers, static contiguous
// chunks. Callers must write results indexed by i so the outcome is
// independent of the worker count. The first worker exception is rethrown.
inline void parallel_for(Index n, int threads,
                         const std::function<void(Index)>& fn) {
  if (n <= 0)
    return;
  if (threads <= 1 || n == 1) {
    for (Index i = 0; i < n; ++i)
      fn(i);
    return;
  }
  const Index workers = std::min<Index>(threads, n);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    const Index begin = n * w / workers;
    const Index end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (Index i = begin; i < end; ++i)
          fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error)
          first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool)
    t.join();
  if (first_error)
    std::rethrow_exception(first_error);
}

} // namespace twophoton
