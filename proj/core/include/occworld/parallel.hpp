#pragma once

#include <cstddef>
#include <functional>

namespace occworld {

/// Worker count for `requested` (0 = hardware concurrency), capped by the
/// OCCWORLD_THREADS environment variable when it holds a positive integer.
int worker_count(int requested = 0);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are claimed
/// dynamically; callers write results by index so the output order does not
/// depend on scheduling. The first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace occworld
