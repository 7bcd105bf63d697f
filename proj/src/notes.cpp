#include "notecoder/notes.hpp"

#include <fstream>

#include <json.hpp>

#include "notecoder/errors.hpp"

namespace notecoder {

using nlohmann::ordered_json;

std::vector<Note> read_notes_jsonl(std::istream& is) {
  std::vector<Note> notes;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw DataError("notes line " + std::to_string(lineno) + ": " + e.what());
    }
    Note n;
    try {
      n.note_id = j.at("note_id").get<std::string>();
      n.patient_id = j.at("patient_id").get<std::string>();
      n.timestamp = j.at("timestamp").get<std::string>();
      n.category = j.value("category", std::string{});
      n.text = j.at("text").get<std::string>();
      for (const auto& c : j.value("codes", ordered_json::array()))
        n.codes.insert(c.get<std::string>());
    } catch (const std::exception& e) {
      throw DataError("notes line " + std::to_string(lineno) + ": " + e.what());
    }
    notes.push_back(std::move(n));
  }
  return notes;
}

std::vector<Note> read_notes_jsonl_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read notes file: " + path);
  return read_notes_jsonl(is);
}

void write_notes_jsonl(std::ostream& os, const std::vector<Note>& notes) {
  for (const auto& n : notes) {
    ordered_json j;
    j["note_id"] = n.note_id;
    j["patient_id"] = n.patient_id;
    j["timestamp"] = n.timestamp;
    j["category"] = n.category;
    j["text"] = n.text;
    j["codes"] = n.codes;
    os << j.dump() << '\n';
  }
}

void write_notes_jsonl_file(const std::string& path, const std::vector<Note>& notes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write notes file: " + path);
  write_notes_jsonl(os, notes);
}

}  // namespace notecoder
