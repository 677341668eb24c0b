#include "qsr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

namespace qsr {

namespace {

std::atomic<unsigned> g_max_threads{ 0 };
thread_local bool t_in_parallel = false;

} // namespace

void
set_max_threads(unsigned count)
{
  g_max_threads.store(count);
}

unsigned
max_threads()
{
  const unsigned configured = g_max_threads.load();
  if (configured != 0)
    return configured;
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

void
parallel_for_impl(std::size_t n,
                  std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body)
{
  if (n == 0)
    return;
  const std::size_t workers =
    std::min<std::size_t>(max_threads(), (n + grain - 1) / std::max<std::size_t>(grain, 1));
  if (t_in_parallel || workers <= 1) {
    body(0, n);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t chunk = (n + workers - 1) / workers;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end)
        break;
      pool.emplace_back([&, begin, end] {
        t_in_parallel = true;
        try {
          body(begin, end);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error)
            first_error = std::current_exception();
        }
      });
    }
  }
  if (first_error)
    std::rethrow_exception(first_error);
}

} // namespace detail

} // namespace qsr
