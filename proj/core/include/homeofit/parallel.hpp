#pragma once

#include <cstddef>
#include <functional>

namespace homeofit {

/// Worker count: `HOMEOFIT_THREADS` if set and positive, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Overrides the worker count for this process (0 restores the default).
void set_worker_count(int n);

/// Runs `body(chunk_index, begin, end)` for fixed-size chunks of [0, n).
/// Chunk boundaries depend only on `n` and `chunk`, never on the worker
/// count, so callers that reduce per-chunk partials in chunk order get
/// bit-identical results for any thread count.
void for_each_chunk(std::size_t n, std::size_t chunk,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) {
  return n == 0 ? 0 : (n + chunk - 1) / chunk;
}

}  // namespace homeofit
