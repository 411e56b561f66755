#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ontree::detail {

/// Runs fn(i) for i in [0, n) on a few worker threads. The first exception
/// is rethrown after all workers stop.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t max_workers = 8) {
  if (n == 0) return;
  std::size_t workers = std::min<std::size_t>({n, max_workers, std::max(1u, std::thread::hardware_concurrency())});
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ontree::detail
