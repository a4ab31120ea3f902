#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dml {

// Runs task(i) for i in [0, count) on up to `threads` workers. Tasks must
// write only to their own output slot; results are then independent of the
// thread count. If several tasks throw, the exception of the lowest index is
// rethrown so failures are reported deterministically too.
inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& task) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = count;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  const std::size_t n_workers = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dml
