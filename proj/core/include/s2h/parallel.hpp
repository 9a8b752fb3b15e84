#pragma once

#include <cstdint>
#include <functional>

namespace s2h {

// Upper bound on worker threads used by the library. 0 restores the default
// (hardware concurrency).
void set_thread_count(int n);
int thread_count();

// Splits [0, n) into contiguous chunks, one per worker, and runs `fn(begin,
// end)` on each. Chunk boundaries depend only on n and the thread count, so
// callers that reduce per-chunk partials in chunk order stay deterministic.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace s2h
