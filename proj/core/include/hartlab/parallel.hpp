#pragma once

#include <cstdint>
#include <functional>

namespace hartlab::parallel {

// 0 means "use hardware concurrency".
int resolve_threads(int requested);

// Splits [0, n) into contiguous chunks and runs `body(chunk_index, begin,
// end)` on a worker per chunk. Callers merge per-chunk results in chunk
// order, which keeps reductions independent of scheduling.
void for_chunks(std::uint64_t n, int threads,
                const std::function<void(int, std::uint64_t, std::uint64_t)>& body);

}  // namespace hartlab::parallel
