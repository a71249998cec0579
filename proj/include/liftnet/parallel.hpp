#pragma once

#include <cstddef>
#include <functional>

namespace liftnet {

// Worker count: hardware concurrency, capped by the LIFTNET_THREADS
// environment variable when set. Always at least 1.
int worker_threads();

// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries
// depend only on n and chunk, never on the thread count, so any reduction
// that combines per-chunk partials in chunk order yields the same floating
// point result under every LIFTNET_THREADS setting. fn must write only to
// state owned by its chunk.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace liftnet
