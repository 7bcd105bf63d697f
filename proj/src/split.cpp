#include "notecoder/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "notecoder/csv.hpp"
#include "notecoder/errors.hpp"
#include "notecoder/rng.hpp"

namespace notecoder {

const char* split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kDev: return "dev";
    case SplitTag::kTest: return "test";
  }
  return "?";
}

SplitTag split_tag_from(const std::string& name) {
  if (name == "train") return SplitTag::kTrain;
  if (name == "dev") return SplitTag::kDev;
  if (name == "test") return SplitTag::kTest;
  throw DataError("unknown split tag: " + name);
}

SplitTag SplitAssignment::tag_of(const std::string& patient_id) const {
  auto it = by_patient.find(patient_id);
  if (it == by_patient.end()) throw DataError("patient not in split assignment: " + patient_id);
  return it->second;
}

void SplitAssignment::save(std::ostream& os) const {
  os << "patient_id,split\n";
  std::vector<std::pair<std::string, SplitTag>> rows(by_patient.begin(), by_patient.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [pid, tag] : rows) write_csv_row(os, {pid, split_tag_name(tag)});
}

void SplitAssignment::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write split file: " + path);
  save(os);
}

SplitAssignment SplitAssignment::load(std::istream& is) {
  SplitAssignment a;
  auto rows = read_csv(is);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (r == 0 && !rows[r].empty() && rows[r][0] == "patient_id") continue;
    if (rows[r].size() < 2) throw DataError("malformed split row " + std::to_string(r + 1));
    if (!a.by_patient.emplace(rows[r][0], split_tag_from(rows[r][1])).second)
      throw DataError("patient appears twice in split file: " + rows[r][0]);
  }
  return a;
}

SplitAssignment SplitAssignment::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read split file: " + path);
  return load(is);
}

SplitAssignment split_by_patient(const std::vector<std::string>& patients,
                                 const std::array<double, 3>& ratios, uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");

  std::vector<std::string> unique = patients;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  // Fisher-Yates on the sorted list keeps the result independent of input order.
  Rng rng(seed);
  for (int64_t i = static_cast<int64_t>(unique.size()) - 1; i > 0; --i)
    std::swap(unique[i], unique[rng.uniform_int(0, i)]);

  const int64_t n = static_cast<int64_t>(unique.size());
  const int64_t cut1 = std::llround(ratios[0] * n);
  const int64_t cut2 = std::llround((ratios[0] + ratios[1]) * n);

  SplitAssignment a;
  a.seed = seed;
  for (int64_t i = 0; i < n; ++i) {
    SplitTag tag = i < cut1 ? SplitTag::kTrain : (i < cut2 ? SplitTag::kDev : SplitTag::kTest);
    a.by_patient.emplace(std::move(unique[i]), tag);
  }
  return a;
}

}  // namespace notecoder
