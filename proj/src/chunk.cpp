#include "notecoder/chunk.hpp"

#include <algorithm>

#include "notecoder/errors.hpp"

namespace notecoder {

namespace {

Chunk blank_chunk(int64_t max_len, const std::string& note_id, int32_t index) {
  Chunk c;
  c.ids.assign(max_len, kPad);
  c.mask.assign(max_len, 0);
  c.segments.assign(max_len, 0);
  c.note_id = note_id;
  c.chunk_index = index;
  return c;
}

}  // namespace

std::vector<Chunk> chunk_note(const TokenizedNote& note, int64_t max_len) {
  if (max_len < 8) throw DataError("max_len must be >= 8");
  const int64_t window = max_len - 2;
  const int64_t n = static_cast<int64_t>(note.token_ids.size());
  const int64_t n_chunks = std::max<int64_t>(1, (n + window - 1) / window);

  std::vector<Chunk> chunks;
  chunks.reserve(n_chunks);
  for (int64_t ci = 0; ci < n_chunks; ++ci) {
    Chunk c = blank_chunk(max_len, note.note_id, static_cast<int32_t>(ci));
    const int64_t lo = ci * window;
    const int64_t hi = std::min(n, lo + window);
    int64_t pos = 0;
    c.ids[pos] = kCls;
    c.mask[pos++] = 1;
    for (int64_t i = lo; i < hi; ++i) {
      c.ids[pos] = note.token_ids[i];
      c.mask[pos++] = 1;
    }
    c.ids[pos] = kSep;
    c.mask[pos++] = 1;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

Chunk make_pair_chunk(const std::vector<int32_t>& seg_a, const std::vector<int32_t>& seg_b,
                      int64_t max_len, const std::string& note_id) {
  if (max_len < 8) throw DataError("max_len must be >= 8");
  if (seg_a.empty() || seg_b.empty()) throw DataError("pair chunk segments must be non-empty");
  int64_t len_a = static_cast<int64_t>(seg_a.size());
  int64_t len_b = static_cast<int64_t>(seg_b.size());
  const int64_t budget = max_len - 3;  // [CLS] and two [SEP]
  while (len_a + len_b > budget) {
    if (len_a >= len_b && len_a > 1) --len_a;
    else if (len_b > 1) --len_b;
    else --len_a;
  }
  if (len_a < 1 || len_b < 1) throw DataError("max_len too small for a sentence pair");

  Chunk c = blank_chunk(max_len, note_id, 0);
  int64_t pos = 0;
  c.ids[pos] = kCls;
  c.mask[pos++] = 1;
  for (int64_t i = 0; i < len_a; ++i) {
    c.ids[pos] = seg_a[i];
    c.mask[pos++] = 1;
  }
  c.ids[pos] = kSep;
  c.mask[pos++] = 1;
  for (int64_t i = 0; i < len_b; ++i) {
    c.ids[pos] = seg_b[i];
    c.segments[pos] = 1;
    c.mask[pos++] = 1;
  }
  c.ids[pos] = kSep;
  c.segments[pos] = 1;
  c.mask[pos++] = 1;
  return c;
}

}  // namespace notecoder
