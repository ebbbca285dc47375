#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace volnet {

/// Threads to use for data-parallel loops; 0 picks hardware concurrency.
std::size_t resolve_thread_count(std::size_t requested);

/// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
/// Chunk boundaries depend only on n and chunk_size, never on the thread
/// count, so callers that write per-chunk results and reduce them in chunk
/// order get bit-identical output on any machine.
void parallel_chunks(std::size_t n, std::size_t chunk_size, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

/// Per-item convenience wrapper over parallel_chunks.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

} // namespace volnet
