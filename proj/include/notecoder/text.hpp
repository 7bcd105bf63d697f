#pragma once

#include <set>
#include <string>
#include <vector>

namespace notecoder {

// Lowercases, splits on whitespace, isolates ASCII punctuation as
// single-character tokens, and rewrites each maximal digit run inside a
// token as 'n' repeated min(run length, 4). Bytes >= 0x80 are treated as
// word characters so multi-byte UTF-8 stays intact.
std::vector<std::string> normalize_text(const std::string& raw);

// Splits a token sequence into sentences at '.', '!', '?' and newline
// markers; the delimiter stays with the preceding sentence and empty
// sentences are dropped.
std::vector<std::vector<std::string>> sentence_split(const std::vector<std::string>& tokens);

// Keep a note iff its raw text has at least min_chars characters and its
// category is not excluded.
bool note_filter(const std::string& raw, const std::string& category,
                 const std::set<std::string>& excluded_categories, size_t min_chars = 50);

}  // namespace notecoder
