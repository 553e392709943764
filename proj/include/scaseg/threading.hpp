#ifndef SCASEG_THREADING_HPP_
#define SCASEG_THREADING_HPP_

#include <thread>
#include <vector>

namespace scaseg {

// Process-wide worker count for parallel_for (default 1).
void set_num_threads(int n);
int num_threads();

namespace detail {
inline thread_local bool in_parallel_region = false;
}

// Splits [begin, end) into contiguous chunks, one per worker. Each index is
// handled by exactly one worker and the per-index work must only write
// locations owned by that index, so results are bit-identical for any
// thread count. Nested calls run sequentially.
template <typename Fn>
void parallel_for(int begin, int end, const Fn& fn) {
  const int n = end - begin;
  const int workers = detail::in_parallel_region ? 1 : std::min(num_threads(), n);
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const int chunk = (n + workers - 1) / workers;
  auto run = [&fn](int lo, int hi) {
    detail::in_parallel_region = true;
    for (int i = lo; i < hi; ++i) fn(i);
    detail::in_parallel_region = false;
  };
  for (int w = 1; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo < hi) pool.emplace_back(run, lo, hi);
  }
  run(begin, std::min(end, begin + chunk));
  for (auto& t : pool) t.join();
}

}  // namespace scaseg

#endif  // SCASEG_THREADING_HPP_
