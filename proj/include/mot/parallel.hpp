#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mot {

// Runs fn(chunk_index, begin, end) over `jobs` contiguous chunks of
// [0, count). Work is partitioned by index, not by scheduling, so results
// written per index are identical at any parallelism level. The lowest
// chunk's exception wins when several throw.
inline void parallel_chunks(std::size_t count, int jobs,
                            const std::function<void(int, std::size_t, std::size_t)>& fn) {
  if (jobs < 1) jobs = 1;
  if (static_cast<std::size_t>(jobs) > count && count > 0)
    jobs = static_cast<int>(count);
  if (jobs == 1 || count == 0) {
    fn(0, 0, count);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (int t = 0; t < jobs; ++t) {
    const std::size_t begin = count * t / jobs;
    const std::size_t end = count * (t + 1) / jobs;
    threads.emplace_back([&, t, begin, end] {
      try {
        fn(t, begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mot
