#include "notecoder/pretrain.hpp"

namespace notecoder {

MaskedChunk mask_tokens(const Chunk& chunk, const MaskingPolicy& policy, int32_t vocab_size,
                        Rng& rng) {
  policy.validate();
  if (vocab_size <= kNumSpecials) throw DataError("vocabulary has no non-special tokens");

  std::vector<int64_t> candidates;
  for (int64_t i = 0; i < chunk.max_len(); ++i)
    if (chunk.mask[i] == 1 && chunk.ids[i] >= kNumSpecials) candidates.push_back(i);
  if (candidates.empty()) throw DataError("no content tokens");

  MaskedChunk out;
  out.chunk = chunk;
  while (out.target_positions.empty()) {
    for (int64_t pos : candidates)
      if (rng.bernoulli(policy.select_prob)) out.target_positions.push_back(pos);
  }
  for (int64_t pos : out.target_positions) {
    out.target_ids.push_back(chunk.ids[pos]);
    const double roll = rng.uniform();
    if (roll < policy.mask_frac) {
      out.chunk.ids[pos] = kMask;
    } else if (roll < policy.mask_frac + policy.random_frac) {
      out.chunk.ids[pos] =
          static_cast<int32_t>(rng.uniform_int(kNumSpecials, vocab_size - 1));
    }  // else keep the original token
  }
  return out;
}

PretrainDoc make_pretrain_doc(const std::string& doc_id, const std::string& text,
                              const Vocab& vocab) {
  PretrainDoc doc;
  doc.doc_id = doc_id;
  for (const auto& sent : sentence_split(normalize_text(text))) {
    std::vector<int32_t> ids;
    ids.reserve(sent.size());
    for (const auto& tok : sent) ids.push_back(vocab.id_of(tok));
    if (!ids.empty()) doc.sentences.push_back(std::move(ids));
  }
  return doc;
}

namespace {

std::vector<int32_t> concat_sentences(const std::vector<std::vector<int32_t>>& sents, size_t lo,
                                      size_t hi) {
  std::vector<int32_t> out;
  for (size_t i = lo; i < hi; ++i) out.insert(out.end(), sents[i].begin(), sents[i].end());
  return out;
}

}  // namespace

NspPair make_nsp_pair(const PretrainDoc& doc, const std::vector<PretrainDoc>& corpus,
                      size_t doc_index, Rng& rng, int64_t max_len) {
  if (doc.sentences.size() < 2) throw DataError("nsp pair needs a document with two sentences");

  const size_t split = static_cast<size_t>(
      rng.uniform_int(1, static_cast<int64_t>(doc.sentences.size()) - 1));
  std::vector<int32_t> seg_a = concat_sentences(doc.sentences, 0, split);

  NspPair pair;
  pair.is_next = rng.bernoulli(0.5);
  std::vector<int32_t> seg_b;
  if (pair.is_next) {
    seg_b = concat_sentences(doc.sentences, split, doc.sentences.size());
  } else {
    size_t other = doc_index;
    size_t usable = 0;
    for (size_t i = 0; i < corpus.size(); ++i)
      if (i != doc_index && !corpus[i].sentences.empty()) ++usable;
    if (usable == 0) throw DataError("negative NSP sampling needs a second document");
    do {
      other = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(corpus.size()) - 1));
    } while (other == doc_index || corpus[other].sentences.empty());
    const auto& sents = corpus[other].sentences;
    const size_t start = static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(sents.size()) - 1));
    seg_b = concat_sentences(sents, start, sents.size());
  }
  pair.chunk = make_pair_chunk(seg_a, seg_b, max_len, doc.doc_id);
  return pair;
}

}  // namespace notecoder
