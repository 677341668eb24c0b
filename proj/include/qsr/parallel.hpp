#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace qsr {

//! Caps the worker count used by parallel_for. 0 restores the default
//! (hardware concurrency).
void set_max_threads(unsigned count);
unsigned max_threads();

namespace detail {
void parallel_for_impl(std::size_t n,
                       std::size_t grain,
                       const std::function<void(std::size_t, std::size_t)>& body);
}

//! Calls fn(i) for every i in [0, n), split into contiguous chunks across
//! worker threads. Nested calls run serially on the calling worker. The first
//! exception thrown by any chunk is rethrown after all workers join.
//! Callers must write results to per-index slots and reduce in index order,
//! so results never depend on the thread count. `grain` is the smallest
//! chunk worth handing to a thread.
template<class Fn>
void
parallel_for(std::size_t n, Fn&& fn, std::size_t grain = 256)
{
  detail::parallel_for_impl(n, grain, [&fn](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      fn(i);
  });
}

} // namespace qsr
