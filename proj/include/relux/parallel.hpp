#pragma once

#include <cstddef>
#include <functional>

namespace relux {

/// Worker count used by parallel kernels. 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs fn(lo, hi) over disjoint contiguous chunks of [begin, end).
/// Chunk boundaries depend only on the range and `grain`, never on the thread count,
/// so kernels that reduce within a chunk stay bit-deterministic.
void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace relux
