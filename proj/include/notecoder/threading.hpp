#pragma once

#include <cstdint>
#include <functional>

namespace notecoder {

// Global worker count used by parallel_for. 0 = hardware concurrency.
void set_num_threads(int n);
int num_threads();

// Splits [0, n) into one contiguous range per worker. Each index is touched
// by exactly one worker and per-range iteration order is fixed, so results
// are bit-identical at any thread count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body);

}  // namespace notecoder
