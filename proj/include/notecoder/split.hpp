#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace notecoder {

enum class SplitTag { kTrain, kDev, kTest };

const char* split_tag_name(SplitTag tag);
SplitTag split_tag_from(const std::string& name);

struct SplitAssignment {
  std::unordered_map<std::string, SplitTag> by_patient;
  uint64_t seed = 0;

  SplitTag tag_of(const std::string& patient_id) const;

  void save(std::ostream& os) const;  // CSV: patient_id,split
  void save_file(const std::string& path) const;
  static SplitAssignment load(std::istream& is);
  static SplitAssignment load_file(const std::string& path);
};

// Deterministic patient-level split. Achieved counts come from cumulative
// rounding of the ratios, so each bucket is within one patient of its
// target.
SplitAssignment split_by_patient(const std::vector<std::string>& patients,
                                 const std::array<double, 3>& ratios, uint64_t seed);

}  // namespace notecoder
