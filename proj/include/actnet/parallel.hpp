#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace actnet {

/// Worker cap used by every parallel loop in the library. Defaults to the
/// hardware concurrency; 0 restores the default.
void set_worker_threads(std::size_t n);
std::size_t worker_threads();

/// Runs body(i) for i in [0, n) over contiguous chunks, one per worker. Each
/// index is visited exactly once; callers write results by index so output is
/// independent of scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace actnet
