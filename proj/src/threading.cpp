#include "notecoder/threading.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace notecoder {

namespace {
int g_threads = 0;

int resolved_threads() {
  if (g_threads > 0) return g_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

void set_num_threads(int n) { g_threads = n < 0 ? 0 : n; }

int num_threads() { return resolved_threads(); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
  if (n <= 0) return;
  const int workers = std::min<int64_t>(resolved_threads(), n);
  if (workers <= 1 || n < 512) {
    body(0, n);
    return;
  }
  const int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) {
    const int64_t lo = w * chunk;
    const int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(0, std::min<int64_t>(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace notecoder
