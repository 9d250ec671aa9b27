#pragma once

// Deterministic parallel-for: the index range is split into contiguous
// chunks, one thread each; every output element is written by exactly one
// thread in a fixed per-element order, so results are bit-identical for any
// thread count.

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace csda {

int thread_count();
void set_thread_count(int n);

template <typename F>
void parallel_for(int begin, int end, F&& body) {
  const int n = end - begin;
  const int threads = std::min(thread_count(), n);
  if (threads <= 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr error;
  std::mutex error_mutex;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body, &error, &error_mutex] {
      try {
        for (int i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace csda
