#pragma once

#include <cstdint>
#include <functional>

namespace lwopt::par {

/// Sizes the shared worker pool. n >= 1; n == 1 runs everything inline.
void set_threads(int n);
int threads();

/// Runs fn(i) for every i in [0, n), blocking until all complete. Execution
/// order is unspecified, so tasks must write to disjoint slots; any fixed
/// combination of those slots afterwards is thread-count independent. Calls
/// from inside a worker run inline (no nested parallelism).
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace lwopt::par
