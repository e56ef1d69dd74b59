#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lclab::par {

inline int default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(begin, end, chunk_index) over fixed-size chunks of [0, total).
//
// Chunk boundaries depend only on (total, chunk_size), never on the worker
// count, so a caller that merges per-chunk results in chunk order gets
// bit-identical output for any number of workers.
inline void parallel_for_chunks(std::int64_t total, std::int64_t chunk_size, int workers,
                                const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn) {
  if (total <= 0) return;
  if (chunk_size <= 0) chunk_size = total;
  const std::int64_t n_chunks = (total + chunk_size - 1) / chunk_size;
  const int n_threads = static_cast<int>(std::min<std::int64_t>(workers < 1 ? 1 : workers, n_chunks));

  if (n_threads <= 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      const std::int64_t begin = c * chunk_size;
      fn(begin, std::min(begin + chunk_size, total), c);
    }
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::int64_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      const std::int64_t begin = c * chunk_size;
      try {
        fn(begin, std::min(begin + chunk_size, total), c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Runs fn(i) for i in [0, count) on a bounded pool, one task per index.
inline void parallel_for_each(std::int64_t count, int workers,
                              const std::function<void(std::int64_t)>& fn) {
  parallel_for_chunks(count, 1, workers,
                      [&fn](std::int64_t begin, std::int64_t, std::int64_t) { fn(begin); });
}

}  // namespace lclab::par
