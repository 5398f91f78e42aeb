#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace rcdens {

// Worker count: hardware concurrency, capped by the RCDENS_THREADS
// environment variable when set.
inline unsigned worker_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("RCDENS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && static_cast<unsigned long>(v) < hw) hw = static_cast<unsigned>(v);
  }
  return hw;
}

namespace detail {
inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

// Static block split of [begin, end). Each index is visited exactly once and
// the callee writes only to per-index slots, so output does not depend on
// scheduling. Nested calls run serially on the calling worker. The first
// exception thrown by a worker is rethrown after join.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  const unsigned want = detail::inside_parallel_region() ? 1 : worker_threads();
  const std::size_t nt = count < want ? count : want;
  if (nt <= 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (count + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < nt; ++w) {
    const std::size_t b = begin + w * chunk;
    const std::size_t e = b + chunk < end ? b + chunk : end;
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      detail::inside_parallel_region() = true;
      try {
        for (std::size_t i = b; i < e; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace rcdens
