#include "notecoder/text.hpp"

#include <cctype>

namespace notecoder {

namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

// Rewrite digit runs: "2019" -> "nnnn", "m12" -> "mnn", run length capped at 4.
std::string fold_digits(const std::string& tok) {
  std::string out;
  out.reserve(tok.size());
  size_t i = 0;
  while (i < tok.size()) {
    if (std::isdigit(static_cast<unsigned char>(tok[i]))) {
      size_t run = 0;
      while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) {
        ++run;
        ++i;
      }
      out.append(std::min<size_t>(run, 4), 'n');
    } else {
      out.push_back(tok[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> normalize_text(const std::string& raw) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(fold_digits(cur));
      cur.clear();
    }
  };
  for (unsigned char c : raw) {
    if (is_ascii_space(c)) {
      flush();
    } else if (is_word_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

std::vector<std::vector<std::string>> sentence_split(const std::vector<std::string>& tokens) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> cur;
  for (const auto& tok : tokens) {
    cur.push_back(tok);
    if (tok == "." || tok == "!" || tok == "?" || tok == "\n") {
      if (cur.size() > 1) sentences.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) sentences.push_back(std::move(cur));
  return sentences;
}

bool note_filter(const std::string& raw, const std::string& category,
                 const std::set<std::string>& excluded_categories, size_t min_chars) {
  return raw.size() >= min_chars && excluded_categories.count(category) == 0;
}

}  // namespace notecoder
