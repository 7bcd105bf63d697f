#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace notecoder {

// Minimal RFC-4180-ish CSV: quoted fields may contain commas, quotes
// (doubled) and newlines.
std::vector<std::vector<std::string>> read_csv(std::istream& is);
std::vector<std::vector<std::string>> read_csv_file(const std::string& path);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

}  // namespace notecoder
