#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace s2wtm {

/// Runs fn(i) for i in [0, count) on up to `workers` threads, each taking a
/// contiguous block. fn must only write to slots owned by index i, so results
/// do not depend on the worker count.
template <typename Fn>
void parallel_for(std::ptrdiff_t count, int workers, Fn&& fn) {
  if (count <= 0) return;
  const std::ptrdiff_t threads = std::clamp<std::ptrdiff_t>(workers, 1, count);
  if (threads == 1) {
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::ptrdiff_t block = (count + threads - 1) / threads;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (std::ptrdiff_t t = 0; t < threads; ++t) {
    const std::ptrdiff_t begin = t * block;
    const std::ptrdiff_t end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace s2wtm
