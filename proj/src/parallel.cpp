#include "occreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace occreg {

std::size_t thread_limit() {
  if (const char* env = std::getenv("OCCREG_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      // fall through to hardware default
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_blocks(std::size_t n, std::size_t block,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  block = std::max<std::size_t>(1, block);
  const std::size_t blocks = block_count(n, block);
  const std::size_t workers = std::min(thread_limit(), blocks);

  auto run_block = [&](std::size_t b) { body(b, b * block, std::min(n, (b + 1) * block)); };
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  auto worker = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) run_block(b);
  };
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
}

}  // namespace occreg
