#pragma once

#include <cstdint>
#include <functional>

namespace peridyn {

/// Number of workers used by parallel loops: hardware concurrency, capped by
/// the PERIDYN_THREADS environment variable and by set_worker_cap.
unsigned worker_count();

/// Programmatic cap on workers (0 restores the default).  Benchmarks pin
/// this to 1 for stable timings.
void set_worker_cap(unsigned cap);

unsigned get_worker_cap();

/// Run fn over [0, n) split into contiguous chunks, one per worker.  Results
/// are independent of the worker count as long as fn writes disjoint slots.
/// Exceptions thrown by workers are rethrown on the calling thread.
void parallel_chunks(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

} // namespace peridyn
