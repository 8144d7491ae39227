#pragma once

#include <cstddef>
#include <functional>

namespace occreg {

/// Worker cap: OCCREG_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_limit();

/// Runs body(begin, end) over [0, n) split into fixed blocks of `block` items.
/// Block boundaries depend only on n and block, never on the thread count, so a
/// caller that writes per-block partial results and combines them in block
/// order gets bitwise-identical output for any OCCREG_THREADS.
void parallel_blocks(std::size_t n, std::size_t block,
                     const std::function<void(std::size_t block_id, std::size_t begin, std::size_t end)>& body);

inline std::size_t block_count(std::size_t n, std::size_t block) { return (n + block - 1) / block; }

}  // namespace occreg
