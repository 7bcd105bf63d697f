#include "notecoder/labels.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "notecoder/csv.hpp"
#include "notecoder/errors.hpp"

namespace notecoder {

void LabelSpace::attach_descriptions(
    const std::unordered_map<std::string, std::string>& by_code) {
  descriptions.assign(codes.size(), std::string{});
  for (size_t i = 0; i < codes.size(); ++i) {
    auto it = by_code.find(codes[i]);
    if (it != by_code.end()) descriptions[i] = it->second;
  }
}

void LabelSpace::attach_chronic(const std::set<std::string>& chronic_set) {
  chronic.assign(codes.size(), false);
  for (size_t i = 0; i < codes.size(); ++i) chronic[i] = chronic_set.count(codes[i]) > 0;
}

void LabelSpace::save(std::ostream& os) const {
  os << "code,count,chronic,description\n";
  for (int32_t i = 0; i < size(); ++i) {
    write_csv_row(os, {codes[i], std::to_string(train_counts[i]),
                       chronic.empty() ? "0" : (chronic[i] ? "1" : "0"),
                       descriptions.empty() ? "" : descriptions[i]});
  }
}

void LabelSpace::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write label space file: " + path);
  save(os);
}

LabelSpace LabelSpace::load(std::istream& is) {
  LabelSpace s;
  auto rows = read_csv(is);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (r == 0 && !rows[r].empty() && rows[r][0] == "code") continue;
    if (rows[r].size() < 4) throw DataError("malformed label space row " + std::to_string(r + 1));
    s.index[rows[r][0]] = s.size();
    s.codes.push_back(rows[r][0]);
    s.train_counts.push_back(std::stoll(rows[r][1]));
    s.chronic.push_back(rows[r][2] == "1");
    s.descriptions.push_back(rows[r][3]);
  }
  return s;
}

LabelSpace LabelSpace::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read label space file: " + path);
  return load(is);
}

std::string LabelSpace::to_string() const {
  std::ostringstream os;
  save(os);
  return os.str();
}

std::unordered_map<std::string, std::string> read_descriptions_csv_file(const std::string& path) {
  auto rows = read_csv_file(path);
  std::unordered_map<std::string, std::string> out;
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    if (r == 0 && rows[r][0] == "code") continue;
    out[rows[r][0]] = rows[r].size() > 1 ? rows[r][1] : std::string{};
  }
  return out;
}

std::set<std::string> read_chronic_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read chronic code file: " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.insert(line);
  }
  return out;
}

std::vector<Note> impute_chronic(const std::vector<Note>& patient_notes,
                                 const std::set<std::string>& chronic_set) {
  for (size_t i = 1; i < patient_notes.size(); ++i) {
    const auto& a = patient_notes[i - 1];
    const auto& b = patient_notes[i];
    if (std::tie(a.timestamp, a.note_id) > std::tie(b.timestamp, b.note_id))
      throw DataError("notes not time-ordered");
  }

  // earliest timestamp and distinct-note count per chronic code
  std::map<std::string, std::pair<std::string, int64_t>> seen;  // code -> (earliest ts, notes)
  for (const auto& n : patient_notes)
    for (const auto& c : n.codes) {
      if (!chronic_set.count(c)) continue;
      auto [it, inserted] = seen.emplace(c, std::make_pair(n.timestamp, int64_t{1}));
      if (!inserted) {
        ++it->second.second;
        if (n.timestamp < it->second.first) it->second.first = n.timestamp;
      }
    }

  std::vector<Note> out = patient_notes;
  for (const auto& [code, info] : seen) {
    if (info.second < 2) continue;
    for (auto& n : out)
      if (n.timestamp >= info.first) n.codes.insert(code);
  }
  return out;
}

LabelSpace filter_labels(const std::vector<Note>& train_notes, int64_t min_count,
                         bool inclusive) {
  if (min_count < 1) throw DataError("min_count must be >= 1");
  std::unordered_map<std::string, int64_t> counts;
  for (const auto& n : train_notes)
    for (const auto& c : n.codes) ++counts[c];

  std::vector<std::pair<std::string, int64_t>> kept;
  for (const auto& [code, cnt] : counts)
    if (inclusive ? cnt >= min_count : cnt > min_count) kept.emplace_back(code, cnt);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  LabelSpace s;
  for (auto& [code, cnt] : kept) {
    s.index[code] = s.size();
    s.codes.push_back(code);
    s.train_counts.push_back(cnt);
  }
  s.descriptions.assign(s.codes.size(), std::string{});
  s.chronic.assign(s.codes.size(), false);
  return s;
}

std::vector<float> label_vector(const std::set<std::string>& note_codes, const LabelSpace& space) {
  std::vector<float> y(space.size(), 0.0f);
  for (const auto& c : note_codes) {
    const int32_t i = space.index_of(c);
    if (i >= 0) y[i] = 1.0f;
  }
  return y;
}

double avg_codes_per_note(const std::vector<Note>& notes, const LabelSpace& space) {
  if (notes.empty()) throw DataError("empty note set");
  double sum = 0;
  for (const auto& n : notes)
    for (const auto& c : n.codes)
      if (space.index_of(c) >= 0) sum += 1;
  return sum / static_cast<double>(notes.size());
}

}  // namespace notecoder
