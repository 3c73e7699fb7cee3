#pragma once

#include <cstddef>
#include <functional>

namespace bftt3d {

// Worker count: BFTT3D_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs
// exactly once; callers write results into per-index slots so output order is
// independent of scheduling. If any call throws, the exception from the lowest
// failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = worker_count());

}  // namespace bftt3d
