#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "femol/mesh.hpp"

namespace femol {

/// Run fn(i) for i in [0, n) on up to `threads` threads. Each index is handled
/// by exactly one call, so results written per index do not depend on the
/// thread count. The exception of the lowest failing chunk is rethrown.
inline void parallel_for(Index n, int threads, const std::function<void(Index)>& fn) {
  const Index workers = std::max<Index>(1, std::min<Index>(threads, n));
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        const Index begin = n * w / workers;
        const Index end = n * (w + 1) / workers;
        try {
          for (Index i = begin; i < end; ++i) fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace femol
