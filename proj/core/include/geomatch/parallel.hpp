#pragma once

#include <cstddef>
#include <functional>

namespace geomatch {

/// Runs `body(i)` for i in [0, count) on up to `threads` worker threads.
/// `threads <= 1` runs inline. The first exception thrown by any task is
/// rethrown on the calling thread after all workers have joined.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// Hardware concurrency with a floor of 1.
unsigned default_threads();

}  // namespace geomatch
