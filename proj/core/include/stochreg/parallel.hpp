#pragma once

#include <cstddef>
#include <functional>

namespace stochreg {

// Worker count: STOCHREG_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

// Runs body(0..count-1) on up to `threads` workers. Work items must write to
// disjoint outputs; results never depend on the schedule. If items throw, the
// exception of the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t threads = thread_count());

}  // namespace stochreg
