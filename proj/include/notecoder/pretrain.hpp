#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "notecoder/encoder.hpp"
#include "notecoder/text.hpp"

namespace notecoder {

struct MaskingPolicy {
  double select_prob = 0.15;
  double mask_frac = 0.8;
  double random_frac = 0.1;
  double keep_frac = 0.1;

  void validate() const {
    if (select_prob <= 0 || select_prob >= 1)
      throw DataError("masking select_prob must be in (0,1)");
    if (std::fabs(mask_frac + random_frac + keep_frac - 1.0) > 1e-9)
      throw DataError("masking fractions must sum to 1");
    if (mask_frac < 0 || random_frac < 0 || keep_frac < 0)
      throw DataError("masking fractions must be non-negative");
  }
};

struct MaskedChunk {
  Chunk chunk;
  std::vector<int64_t> target_positions;  // positions inside the chunk
  std::vector<int32_t> target_ids;        // original ids at those positions
};

// Independently selects content tokens (never specials or padding) with
// select_prob; each selected token becomes [MASK] / a random non-special id /
// stays, per the policy fractions. Reselects until at least one target.
MaskedChunk mask_tokens(const Chunk& chunk, const MaskingPolicy& policy, int32_t vocab_size,
                        Rng& rng);

struct NspPair {
  Chunk chunk;
  bool is_next = false;
};

// A document prepared for pretraining: its sentences as id sequences.
struct PretrainDoc {
  std::string doc_id;
  std::vector<std::vector<int32_t>> sentences;
  int64_t total_tokens() const {
    int64_t n = 0;
    for (const auto& s : sentences) n += static_cast<int64_t>(s.size());
    return n;
  }
};

PretrainDoc make_pretrain_doc(const std::string& doc_id, const std::string& text,
                              const Vocab& vocab);

// Positive pairs split one document's sentence list in two; negative pairs
// draw the second segment from a different document. Longer segment is
// truncated from its end to fit max_len.
NspPair make_nsp_pair(const PretrainDoc& doc, const std::vector<PretrainDoc>& corpus,
                      size_t doc_index, Rng& rng, int64_t max_len);

struct PretrainHParams {
  int64_t epochs = 2;
  int64_t batch_size = 32;
  double peak_lr = 1e-3;
  double warmup_proportion = 0.1;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t log_interval = 20;
  MaskingPolicy masking;
};

struct PretrainLogRow {
  int64_t step = 0;
  double lr = 0;
  double mlm_loss = 0;
  double nsp_loss = 0;
  double dev_mlm_loss = 0;
  double dev_nsp_loss = 0;
};

struct PretrainResult {
  std::vector<PretrainLogRow> curve;
  int64_t best_step = 0;
  double best_dev_loss = 0;
};

// Joint MLM + NSP training with AdamW and the warmup/decay schedule. The
// parameters left in `encoder` afterwards are the best-dev checkpoint.
template <class Real>
PretrainResult pretrain(EncoderT<Real>& encoder, const std::vector<PretrainDoc>& train_docs,
                        const std::vector<PretrainDoc>& dev_docs, const PretrainHParams& hp,
                        uint64_t seed);

// Masks the requested content positions of a note and returns the argmax
// token per masked position.
template <class Real>
std::vector<std::pair<int64_t, std::string>> mlm_infill(const std::string& text,
                                                        const EncoderT<Real>& encoder,
                                                        const Vocab& vocab,
                                                        const std::vector<int64_t>& positions);

// ---------------------------------------------------------------------------

template <class Real>
PretrainResult pretrain(EncoderT<Real>& encoder, const std::vector<PretrainDoc>& train_docs,
                        const std::vector<PretrainDoc>& dev_docs, const PretrainHParams& hp,
                        uint64_t seed) {
  if (train_docs.empty()) throw DataError("pretrain: empty training corpus");
  hp.masking.validate();
  const int64_t max_len = encoder.cfg.max_len;
  const int32_t vocab_size = static_cast<int32_t>(encoder.cfg.vocab_size);

  Rng master(seed);
  Rng dev_rng = master.fork(1);
  Rng dropout_rng = master.fork(2);

  // fixed dev batch set: one pair per dev document, masked once
  std::vector<MaskedChunk> dev_masked;
  std::vector<float> dev_is_next;
  for (size_t i = 0; i < dev_docs.size(); ++i) {
    if (dev_docs[i].sentences.size() < 2) continue;
    NspPair pair = make_nsp_pair(dev_docs[i], dev_docs, i, dev_rng, max_len);
    dev_masked.push_back(mask_tokens(pair.chunk, hp.masking, vocab_size, dev_rng));
    dev_is_next.push_back(pair.is_next ? 1.f : 0.f);
  }

  std::vector<size_t> usable;
  for (size_t i = 0; i < train_docs.size(); ++i)
    if (train_docs[i].sentences.size() >= 2) usable.push_back(i);
  if (usable.empty()) throw DataError("pretrain: no document has two sentences");

  const int64_t steps_per_epoch =
      std::max<int64_t>(1, static_cast<int64_t>(usable.size()) / hp.batch_size);
  Schedule sched{hp.peak_lr, hp.epochs * steps_per_epoch, hp.warmup_proportion};

  AdamWT<Real> opt;
  opt.beta1 = hp.adam_beta1;
  opt.beta2 = hp.adam_beta2;
  opt.eps = hp.adam_eps;
  opt.weight_decay = hp.weight_decay;

  auto eval_dev = [&](double& mlm_out, double& nsp_out) {
    NoGradGuard ng;
    double mlm_sum = 0, nsp_sum = 0;
    int64_t batches = 0;
    for (size_t lo = 0; lo < dev_masked.size(); lo += hp.batch_size) {
      const size_t hi = std::min(dev_masked.size(), lo + hp.batch_size);
      std::vector<const Chunk*> batch;
      std::vector<int32_t> mlm_targets;
      std::vector<int64_t> mlm_rows;
      TensorT<Real> nsp_t({static_cast<int64_t>(hi - lo), 1});
      for (size_t i = lo; i < hi; ++i) {
        batch.push_back(&dev_masked[i].chunk);
        for (size_t k = 0; k < dev_masked[i].target_positions.size(); ++k) {
          mlm_rows.push_back(static_cast<int64_t>(i - lo) * max_len +
                             dev_masked[i].target_positions[k]);
          mlm_targets.push_back(dev_masked[i].target_ids[k]);
        }
        nsp_t.v[i - lo] = static_cast<Real>(dev_is_next[i]);
      }
      auto enc_out = encoder.forward(batch);
      auto flat = reshape(enc_out.hidden,
                          {static_cast<int64_t>(batch.size()) * max_len, encoder.cfg.hidden_size});
      std::vector<int32_t> rows32(mlm_rows.begin(), mlm_rows.end());
      auto mlm_loss = masked_cross_entropy(encoder.mlm_logits(gather_rows(flat, rows32)),
                                           mlm_targets);
      auto nsp_loss = bce_with_logits(encoder.nsp_logits(enc_out.hidden), nsp_t);
      mlm_sum += mlm_loss->value.v[0];
      nsp_sum += nsp_loss->value.v[0];
      ++batches;
    }
    mlm_out = batches ? mlm_sum / batches : 0;
    nsp_out = batches ? nsp_sum / batches : 0;
  };

  PretrainResult res;
  std::vector<TensorT<Real>> best_params;
  res.best_dev_loss = std::numeric_limits<double>::infinity();
  double run_mlm = 0, run_nsp = 0;
  int64_t run_n = 0, step = 0;

  auto log_point = [&]() {
    double dev_mlm = 0, dev_nsp = 0;
    eval_dev(dev_mlm, dev_nsp);
    PretrainLogRow row;
    row.step = step;
    row.lr = lr_at(std::min(step, sched.total_steps), sched);
    row.mlm_loss = run_n ? run_mlm / run_n : 0;
    row.nsp_loss = run_n ? run_nsp / run_n : 0;
    row.dev_mlm_loss = dev_mlm;
    row.dev_nsp_loss = dev_nsp;
    res.curve.push_back(row);
    run_mlm = run_nsp = 0;
    run_n = 0;
    const double dev_total = dev_mlm + dev_nsp;
    if (dev_total < res.best_dev_loss) {
      res.best_dev_loss = dev_total;
      res.best_step = step;
      best_params.clear();
      for (const auto& it : encoder.store.items) best_params.push_back(it.var->value);
    }
  };

  for (int64_t epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng erng = master.fork(100 + epoch);
    std::vector<size_t> order = usable;
    for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[erng.uniform_int(0, i)]);

    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      std::vector<MaskedChunk> masked;
      std::vector<float> is_next;
      for (int64_t i = b * hp.batch_size;
           i < std::min<int64_t>((b + 1) * hp.batch_size, order.size()); ++i) {
        NspPair pair = make_nsp_pair(train_docs[order[i]], train_docs, order[i], erng, max_len);
        masked.push_back(mask_tokens(pair.chunk, hp.masking, vocab_size, erng));
        is_next.push_back(pair.is_next ? 1.f : 0.f);
      }
      std::vector<const Chunk*> batch;
      std::vector<int32_t> mlm_targets, mlm_rows;
      TensorT<Real> nsp_t({static_cast<int64_t>(masked.size()), 1});
      for (size_t i = 0; i < masked.size(); ++i) {
        batch.push_back(&masked[i].chunk);
        for (size_t k = 0; k < masked[i].target_positions.size(); ++k) {
          mlm_rows.push_back(
              static_cast<int32_t>(static_cast<int64_t>(i) * max_len +
                                   masked[i].target_positions[k]));
          mlm_targets.push_back(masked[i].target_ids[k]);
        }
        nsp_t.v[i] = static_cast<Real>(is_next[i]);
      }

      for (auto& it : encoder.store.items) it.var->zero_grad();
      auto enc_out = encoder.forward(batch, /*training=*/true, &dropout_rng);
      auto flat = reshape(enc_out.hidden,
                          {static_cast<int64_t>(batch.size()) * max_len, encoder.cfg.hidden_size});
      auto mlm_loss =
          masked_cross_entropy(encoder.mlm_logits(gather_rows(flat, mlm_rows)), mlm_targets);
      auto nsp_loss = bce_with_logits(encoder.nsp_logits(enc_out.hidden), nsp_t);
      auto loss = add(mlm_loss, nsp_loss);
      if (!loss->value.all_finite())
        throw NumericError("pretrain: non-finite loss at step " + std::to_string(step));
      backward(loss);
      opt.step({&encoder.store}, lr_at(std::min(step + 1, sched.total_steps), sched));

      run_mlm += mlm_loss->value.v[0];
      run_nsp += nsp_loss->value.v[0];
      ++run_n;
      ++step;
      if (step % hp.log_interval == 0) log_point();
    }
  }
  if (res.curve.empty() || res.curve.back().step != step) log_point();

  // leave the best-dev parameters in place
  if (!best_params.empty())
    for (size_t i = 0; i < encoder.store.items.size(); ++i)
      encoder.store.items[i].var->value = best_params[i];
  return res;
}

template <class Real>
std::vector<std::pair<int64_t, std::string>> mlm_infill(const std::string& text,
                                                        const EncoderT<Real>& encoder,
                                                        const Vocab& vocab,
                                                        const std::vector<int64_t>& positions) {
  auto tn = encode(normalize_text(text), vocab, "infill");
  const int64_t window = encoder.cfg.max_len - 2;
  const int64_t usable = std::min<int64_t>(window, tn.token_ids.size());
  for (int64_t p : positions)
    if (p < 0 || p >= usable) throw DataError("invalid infill position " + std::to_string(p));
  if (positions.empty()) return {};

  Chunk chunk = chunk_note(tn, encoder.cfg.max_len)[0];
  for (int64_t p : positions) chunk.ids[p + 1] = kMask;  // +1 skips [CLS]

  NoGradGuard ng;
  auto enc_out = encoder.forward_one(chunk);
  auto flat = reshape(enc_out.hidden, {encoder.cfg.max_len, encoder.cfg.hidden_size});
  std::vector<int32_t> rows;
  for (int64_t p : positions) rows.push_back(static_cast<int32_t>(p + 1));
  auto logits = encoder.mlm_logits(gather_rows(flat, rows));

  std::vector<std::pair<int64_t, std::string>> out;
  const int64_t V = encoder.cfg.vocab_size;
  for (size_t i = 0; i < positions.size(); ++i) {
    const Real* z = logits->value.row(static_cast<int64_t>(i));
    int64_t best = 0;
    for (int64_t j = 1; j < V; ++j)
      if (z[j] > z[best]) best = j;
    out.emplace_back(positions[i], vocab.tokens[best]);
  }
  return out;
}

}  // namespace notecoder
