#pragma once

#include <cstddef>
#include <functional>

namespace temple {

// Worker count used by parallel_for; 0 or 1 runs inline.
void set_threads(int n);
int threads();

// Runs body(i) for i in [0, count). Each index is handled exactly once and results must be
// written by index, so the outcome does not depend on the thread count. The exception from
// the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace temple
