#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "notecoder/vocab.hpp"

namespace notecoder {

// Fixed-length encoder window: [CLS] content [SEP] (+ optional second
// segment ending in its own [SEP]), padded with [PAD]/mask 0. The mask is a
// prefix of ones.
struct Chunk {
  std::vector<int32_t> ids;
  std::vector<int32_t> mask;      // 1 = real token, 0 = padding
  std::vector<int32_t> segments;  // 0 = first segment, 1 = second
  std::string note_id;
  int32_t chunk_index = 0;

  int64_t max_len() const { return static_cast<int64_t>(ids.size()); }
  int64_t seq_len() const {
    int64_t n = 0;
    for (int32_t m : mask) n += m;
    return n;
  }
};

// Splits content tokens into consecutive windows of max_len-2, each wrapped
// as [CLS] content [SEP]. An empty note yields a single [CLS][SEP] chunk.
std::vector<Chunk> chunk_note(const TokenizedNote& note, int64_t max_len);

// Two-segment chunk [CLS] a [SEP] b [SEP] for next-sentence training.
// Whichever segment is longer is truncated from its end until the pair fits.
Chunk make_pair_chunk(const std::vector<int32_t>& seg_a, const std::vector<int32_t>& seg_b,
                      int64_t max_len, const std::string& note_id = {});

}  // namespace notecoder
