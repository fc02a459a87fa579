#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace npcure {

inline unsigned default_threads() noexcept
{
  return std::max(1u, std::thread::hardware_concurrency());
}

//! Runs body(i) for i in [0, count) on up to `threads` workers.
//!
//! Bodies must write only to index-owned slots. If several bodies throw, the
//! exception of the lowest index is rethrown, so failures are reported the
//! same way at every thread count.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body)
{
  if (threads == 0)
    threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failed_index = count;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count)
        return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back(worker);
  }
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace npcure
