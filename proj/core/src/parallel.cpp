#include "hartlab/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace hartlab::parallel {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void for_chunks(std::uint64_t n, int threads,
                const std::function<void(int, std::uint64_t, std::uint64_t)>& body) {
  if (n == 0) return;
  const int workers = std::min<std::uint64_t>(static_cast<std::uint64_t>(resolve_threads(threads)), n);
  if (workers <= 1) {
    body(0, 0, n);
    return;
  }
  const std::uint64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int c = 0; c < workers; ++c) {
    const std::uint64_t begin = static_cast<std::uint64_t>(c) * chunk;
    const std::uint64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, c, begin, end] { body(c, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace hartlab::parallel
