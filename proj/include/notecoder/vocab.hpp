#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace notecoder {

// Special token ids are fixed so checkpoints stay stable across runs.
enum SpecialId : int32_t { kPad = 0, kUnk = 1, kCls = 2, kSep = 3, kMask = 4 };
inline constexpr int32_t kNumSpecials = 5;
extern const char* const kSpecialTokens[kNumSpecials];  // [PAD] [UNK] [CLS] [SEP] [MASK]

// Closed frequency-derived vocabulary: the 5 specials plus at most K
// non-special tokens, ids dense in [0, size).
struct Vocab {
  std::vector<std::string> tokens;               // id -> token, specials first
  std::unordered_map<std::string, int32_t> index;  // token -> id
  std::vector<int64_t> counts;                   // id -> train-corpus frequency (0 for specials)

  int32_t size() const { return static_cast<int32_t>(tokens.size()); }
  int32_t id_of(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? kUnk : it->second;
  }
  bool contains(const std::string& tok) const { return index.count(tok) > 0; }

  void save(std::ostream& os) const;
  void save_file(const std::string& path) const;
  static Vocab load(std::istream& is);
  static Vocab load_file(const std::string& path);

  // Canonical serialized form, also used for checkpoint hash checks.
  std::string to_string() const;
};

// Streaming frequency counter so corpus-scale builds need one pass.
class VocabBuilder {
 public:
  void add(const std::string& token);
  void add_all(const std::vector<std::string>& tokens);
  // The K most frequent distinct tokens; ties broken lexicographically.
  Vocab finish(int64_t budget) const;

 private:
  std::unordered_map<std::string, int64_t> counts_;
};

Vocab build_vocab(const std::vector<std::string>& token_stream, int64_t budget);

struct TokenizedNote {
  std::string note_id;
  std::vector<std::string> token_strings;
  std::vector<int32_t> token_ids;
  int64_t oov_count = 0;
};

TokenizedNote encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                     std::string note_id = {});

double mean_oov_per_note(const std::vector<TokenizedNote>& corpus);

}  // namespace notecoder
