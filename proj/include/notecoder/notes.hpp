#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace notecoder {

// One clinical document. Timestamps are zero-padded ISO-8601 strings so
// lexicographic order is chronological order.
struct Note {
  std::string note_id;
  std::string patient_id;
  std::string timestamp;
  std::string category;
  std::string text;
  std::set<std::string> codes;
};

// JSON-lines: one object per line with fields note_id, patient_id,
// timestamp, category, text, codes.
std::vector<Note> read_notes_jsonl(std::istream& is);
std::vector<Note> read_notes_jsonl_file(const std::string& path);
void write_notes_jsonl(std::ostream& os, const std::vector<Note>& notes);
void write_notes_jsonl_file(const std::string& path, const std::vector<Note>& notes);

}  // namespace notecoder
