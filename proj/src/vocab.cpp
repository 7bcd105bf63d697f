#include "notecoder/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "notecoder/errors.hpp"

namespace notecoder {

const char* const kSpecialTokens[kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

namespace {

bool is_special_string(const std::string& tok) {
  for (const char* s : kSpecialTokens)
    if (tok == s) return true;
  return false;
}

Vocab with_specials() {
  Vocab v;
  for (int32_t i = 0; i < kNumSpecials; ++i) {
    v.tokens.emplace_back(kSpecialTokens[i]);
    v.index[kSpecialTokens[i]] = i;
    v.counts.push_back(0);
  }
  return v;
}

}  // namespace

void VocabBuilder::add(const std::string& token) { ++counts_[token]; }

void VocabBuilder::add_all(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) add(t);
}

Vocab VocabBuilder::finish(int64_t budget) const {
  if (budget < 1) throw DataError("vocab budget must be >= 1");
  std::vector<std::pair<std::string, int64_t>> ranked;
  ranked.reserve(counts_.size());
  for (const auto& [tok, cnt] : counts_)
    if (!is_special_string(tok)) ranked.emplace_back(tok, cnt);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int64_t>(ranked.size()) > budget) ranked.resize(budget);

  Vocab v = with_specials();
  for (const auto& [tok, cnt] : ranked) {
    v.index[tok] = v.size();
    v.tokens.push_back(tok);
    v.counts.push_back(cnt);
  }
  return v;
}

Vocab build_vocab(const std::vector<std::string>& token_stream, int64_t budget) {
  VocabBuilder b;
  b.add_all(token_stream);
  return b.finish(budget);
}

// Text format: one line per special ("#special <id> <token>"), then one line
// per non-special token ("<token>\t<count>") whose line position encodes
// id - 5.
void Vocab::save(std::ostream& os) const {
  for (int32_t i = 0; i < kNumSpecials; ++i) os << "#special\t" << i << '\t' << tokens[i] << '\n';
  for (int32_t i = kNumSpecials; i < size(); ++i) os << tokens[i] << '\t' << counts[i] << '\n';
}

std::string Vocab::to_string() const {
  std::ostringstream os;
  save(os);
  return os.str();
}

void Vocab::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write vocab file: " + path);
  save(os);
}

Vocab Vocab::load(std::istream& is) {
  Vocab v = with_specials();
  std::string line;
  int32_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("#special", 0) == 0) continue;  // fixed ids, nothing to read
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed vocab line " + std::to_string(lineno));
    std::string tok = line.substr(0, tab);
    const int64_t cnt = std::stoll(line.substr(tab + 1));
    if (v.index.count(tok)) throw DataError("duplicate vocab token: " + tok);
    v.index[tok] = v.size();
    v.tokens.push_back(std::move(tok));
    v.counts.push_back(cnt);
  }
  return v;
}

Vocab Vocab::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read vocab file: " + path);
  return load(is);
}

TokenizedNote encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                     std::string note_id) {
  TokenizedNote out;
  out.note_id = std::move(note_id);
  out.token_strings = tokens;
  out.token_ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const int32_t id = vocab.id_of(t);
    out.token_ids.push_back(id);
    if (id == kUnk) ++out.oov_count;
  }
  return out;
}

double mean_oov_per_note(const std::vector<TokenizedNote>& corpus) {
  if (corpus.empty()) throw DataError("empty corpus");
  double sum = 0;
  for (const auto& n : corpus) sum += static_cast<double>(n.oov_count);
  return sum / static_cast<double>(corpus.size());
}

}  // namespace notecoder
