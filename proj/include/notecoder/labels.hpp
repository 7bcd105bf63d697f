#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "notecoder/notes.hpp"

namespace notecoder {

// Ordered ICD code universe with descriptions, training frequencies and
// chronic flags. Code order is stable across save/load.
struct LabelSpace {
  std::vector<std::string> codes;
  std::unordered_map<std::string, int32_t> index;
  std::vector<std::string> descriptions;  // aligned with codes, may be empty
  std::vector<int64_t> train_counts;      // aligned with codes
  std::vector<bool> chronic;              // aligned with codes

  int32_t size() const { return static_cast<int32_t>(codes.size()); }
  int32_t index_of(const std::string& code) const {
    auto it = index.find(code);
    return it == index.end() ? -1 : it->second;
  }

  void attach_descriptions(const std::unordered_map<std::string, std::string>& by_code);
  void attach_chronic(const std::set<std::string>& chronic_set);

  void save(std::ostream& os) const;  // CSV: code,count,chronic,description
  void save_file(const std::string& path) const;
  static LabelSpace load(std::istream& is);
  static LabelSpace load_file(const std::string& path);
  std::string to_string() const;
};

// descriptions CSV has columns code,description (header optional).
std::unordered_map<std::string, std::string> read_descriptions_csv_file(const std::string& path);

// chronic list: one code per line; '#' starts a comment.
std::set<std::string> read_chronic_file(const std::string& path);

// Once a chronic code is seen in two or more of a patient's notes, it is
// added to every note whose timestamp is >= its earliest occurrence.
// Input must be ascending by (timestamp, note_id); idempotent.
std::vector<Note> impute_chronic(const std::vector<Note>& patient_notes,
                                 const std::set<std::string>& chronic_set);

// Codes occurring more than min_count times across training notes (or
// >= min_count when inclusive), ordered by descending count then code.
LabelSpace filter_labels(const std::vector<Note>& train_notes, int64_t min_count,
                         bool inclusive = false);

std::vector<float> label_vector(const std::set<std::string>& note_codes, const LabelSpace& space);

// Mean number of in-space codes per note.
double avg_codes_per_note(const std::vector<Note>& notes, const LabelSpace& space);

}  // namespace notecoder
