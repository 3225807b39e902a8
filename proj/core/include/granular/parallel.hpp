#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace granular {

// Number of worker threads to use when the caller passes 0.
unsigned default_thread_count() noexcept;

// Runs body(i) for i in [0, n) on up to `threads` workers using a static
// contiguous partition. Results must be written to per-index slots; the
// schedule never affects which index a slot receives. Exceptions thrown by
// the body are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body);

// Pairwise (cascade) summation; the reduction tree depends only on the
// length of the input, so the result is independent of thread scheduling.
double pairwise_sum(std::span<const double> values) noexcept;

}  // namespace granular
