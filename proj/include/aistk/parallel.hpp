#pragma once

#include <functional>

namespace aistk {

/// Runs fn(i) for i in [0, n). With threads <= 1 the loop is inline.
/// Work is partitioned into contiguous ranges, one per worker, so results
/// written by index are identical for a fixed thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Range-per-worker variant: fn(worker_index, begin, end).
void parallel_ranges(int n, int threads,
                     const std::function<void(int, int, int)>& fn);

}  // namespace aistk
