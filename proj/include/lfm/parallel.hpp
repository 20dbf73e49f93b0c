#pragma once

#include <cstddef>
#include <functional>

namespace lfm {

/// Global worker count for parallel_for. Defaults to 1 (fully serial) so
/// results are reproducible unless concurrency is requested explicitly.
/// Resolution order: set_thread_count() > LFM_THREADS env var > 1.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for i in [begin, end). Work is split into contiguous blocks,
/// one per worker. Iterations must write to disjoint locations; under that
/// contract the result is independent of the worker count.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn);

/// Runs fn(chunk) for chunk in [0, nchunks) distributing whole chunks over
/// workers. Chunks must write to disjoint locations.
void parallel_chunks(std::size_t nchunks,
                     const std::function<void(std::size_t)>& fn);

} // namespace lfm
