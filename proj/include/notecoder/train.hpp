#pragma once

#include <array>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "notecoder/heads.hpp"
#include "notecoder/metrics.hpp"

namespace notecoder {

enum class HeadKind { kCls, kXml, kMultihead, kLogreg };

inline const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::kCls: return "cls";
    case HeadKind::kXml: return "xml";
    case HeadKind::kMultihead: return "multihead";
    case HeadKind::kLogreg: return "logreg";
  }
  return "?";
}

inline HeadKind head_kind_from(const std::string& name) {
  if (name == "cls") return HeadKind::kCls;
  if (name == "xml") return HeadKind::kXml;
  if (name == "multihead") return HeadKind::kMultihead;
  if (name == "logreg") return HeadKind::kLogreg;
  throw DataError("unknown head: " + name);
}

struct ClassifierSpec {
  HeadKind kind = HeadKind::kXml;
  EncoderConfig encoder_cfg;  // cls/xml
  int64_t num_labels = 0;
  int64_t vocab_size = 0;
  int64_t attn_dim = 0;  // xml readout width d_a; 0 = hidden size
  int64_t mh_emb_dim = 300;
  int64_t mh_hidden = 512;
  int64_t mh_heads = 200;
  bool mh_scale_context = true;
};

template <class Real>
struct ClassifierT {
  ClassifierSpec spec;
  std::unique_ptr<EncoderT<Real>> encoder;
  std::unique_ptr<ClsHeadT<Real>> cls;
  std::unique_ptr<XmlHeadT<Real>> xml;
  std::unique_ptr<MultiHeadBaselineT<Real>> multihead;
  std::unique_ptr<BowLogRegT<Real>> logreg;

  std::vector<ParamStoreT<Real>*> stores() {
    std::vector<ParamStoreT<Real>*> out;
    if (encoder) out.push_back(&encoder->store);
    if (cls) out.push_back(&cls->store);
    if (xml) out.push_back(&xml->store);
    if (multihead) out.push_back(&multihead->store);
    if (logreg) out.push_back(&logreg->store);
    return out;
  }

  void zero_grad() {
    for (auto* s : stores()) s->zero_grad();
  }
};

template <class Real>
ClassifierT<Real> build_classifier(const ClassifierSpec& spec, uint64_t seed) {
  if (spec.num_labels <= 0) throw DataError("classifier needs a non-empty label space");
  ClassifierT<Real> m;
  m.spec = spec;
  Rng rng(seed);
  switch (spec.kind) {
    case HeadKind::kCls:
      m.encoder = std::make_unique<EncoderT<Real>>(
          EncoderT<Real>::init(spec.encoder_cfg, rng.fork(0).next_u64()));
      m.cls = std::make_unique<ClsHeadT<Real>>(ClsHeadT<Real>::init(
          spec.num_labels, spec.encoder_cfg.hidden_size, rng.fork(1).next_u64()));
      break;
    case HeadKind::kXml:
      m.encoder = std::make_unique<EncoderT<Real>>(
          EncoderT<Real>::init(spec.encoder_cfg, rng.fork(0).next_u64()));
      m.xml = std::make_unique<XmlHeadT<Real>>(
          XmlHeadT<Real>::init(spec.num_labels, spec.encoder_cfg.hidden_size, spec.attn_dim,
                               rng.fork(1).next_u64()));
      break;
    case HeadKind::kMultihead:
      m.multihead = std::make_unique<MultiHeadBaselineT<Real>>(MultiHeadBaselineT<Real>::init(
          spec.vocab_size, spec.num_labels, spec.mh_emb_dim, spec.mh_hidden, spec.mh_heads,
          rng.fork(1).next_u64(), spec.mh_scale_context));
      break;
    case HeadKind::kLogreg:
      m.logreg =
          std::make_unique<BowLogRegT<Real>>(BowLogRegT<Real>::init(spec.vocab_size,
                                                                    spec.num_labels));
      break;
  }
  return m;
}

// Positions the label-attention may use: real tokens that are not [CLS] or
// [SEP]. Falls back to position 0 for content-free chunks so the softmax
// stays defined.
template <class Real>
TensorT<Real> content_attention_mask(const std::vector<const Chunk*>& batch) {
  const int64_t B = static_cast<int64_t>(batch.size());
  const int64_t N = batch[0]->max_len();
  TensorT<Real> mask({B, N});
  for (int64_t b = 0; b < B; ++b) {
    bool any = false;
    for (int64_t i = 0; i < N; ++i) {
      const bool content = batch[b]->mask[i] == 1 && batch[b]->ids[i] != kCls &&
                           batch[b]->ids[i] != kSep && batch[b]->ids[i] != kPad;
      mask.v[b * N + i] = content ? Real(1) : Real(0);
      any = any || content;
    }
    if (!any) mask.v[b * N] = Real(1);
  }
  return mask;
}

template <class Real>
TensorT<Real> pad_attention_mask(const std::vector<const Chunk*>& batch) {
  const int64_t B = static_cast<int64_t>(batch.size());
  const int64_t N = batch[0]->max_len();
  TensorT<Real> mask({B, N});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < N; ++i) mask.v[b * N + i] = static_cast<Real>(batch[b]->mask[i]);
  return mask;
}

// One labeled note prepared for training: its encoder chunks plus the flat
// token ids used by the bag-of-words model.
struct NoteExample {
  std::string note_id;
  std::vector<Chunk> chunks;
  std::vector<int32_t> flat_ids;
  std::vector<float> labels;
};

struct ClassifyDataset {
  std::vector<NoteExample> train;
  std::vector<NoteExample> dev;
  int32_t num_labels = 0;
};

template <class Real>
VarT<Real> classifier_logits(const ClassifierT<Real>& m, const std::vector<const Chunk*>& batch,
                             bool training, Rng* dropout_rng) {
  switch (m.spec.kind) {
    case HeadKind::kCls: {
      auto out = m.encoder->forward(batch, training, dropout_rng);
      return m.cls->logits(out.hidden);
    }
    case HeadKind::kXml: {
      auto out = m.encoder->forward(batch, training, dropout_rng);
      return m.xml->forward(out.hidden, content_attention_mask<Real>(batch)).logits;
    }
    case HeadKind::kMultihead: {
      std::vector<std::vector<int32_t>> ids;
      ids.reserve(batch.size());
      for (const Chunk* c : batch) ids.push_back(c->ids);
      return m.multihead->forward(ids, pad_attention_mask<Real>(batch)).logits;
    }
    case HeadKind::kLogreg:
      throw DataError("logreg consumes note-level count features, not chunks");
  }
  throw DataError("unreachable head kind");
}

template <class Real>
std::vector<float> predict_note_scores(const ClassifierT<Real>& m, const NoteExample& note) {
  NoGradGuard ng;
  if (m.spec.kind == HeadKind::kLogreg) {
    auto counts = leaf(m.logreg->count_features(note.flat_ids));
    auto probs = sigmoid_values(m.logreg->logits(counts)->value);
    return std::vector<float>(probs.v.begin(), probs.v.end());
  }
  std::vector<std::vector<float>> chunk_scores;
  for (const Chunk& c : note.chunks) {
    auto logits = classifier_logits(m, {&c}, false, nullptr);
    auto probs = sigmoid_values(logits->value);
    chunk_scores.emplace_back(probs.v.begin(), probs.v.end());
  }
  return aggregate_chunks(chunk_scores);
}

template <class Real>
PredictionSet predict_set(const ClassifierT<Real>& m, const std::vector<NoteExample>& notes,
                          int64_t batch_size = 16) {
  NoGradGuard ng;
  PredictionSet ps;
  ps.num_labels = static_cast<int32_t>(m.spec.num_labels);
  ps.note_ids.reserve(notes.size());

  if (m.spec.kind == HeadKind::kLogreg) {
    for (const auto& n : notes) {
      ps.note_ids.push_back(n.note_id);
      ps.scores.push_back(predict_note_scores(m, n));
      ps.targets.push_back(n.labels);
    }
    return ps;
  }

  // batch chunks across notes, then max-aggregate per note
  std::vector<std::pair<size_t, const Chunk*>> all;
  for (size_t i = 0; i < notes.size(); ++i)
    for (const Chunk& c : notes[i].chunks) all.emplace_back(i, &c);
  std::vector<std::vector<std::vector<float>>> per_note(notes.size());
  for (size_t lo = 0; lo < all.size(); lo += batch_size) {
    const size_t hi = std::min(all.size(), lo + static_cast<size_t>(batch_size));
    std::vector<const Chunk*> batch;
    for (size_t i = lo; i < hi; ++i) batch.push_back(all[i].second);
    auto probs = sigmoid_values(classifier_logits(m, batch, false, nullptr)->value);
    const int64_t M = m.spec.num_labels;
    for (size_t i = lo; i < hi; ++i) {
      std::vector<float> s(M);
      for (int64_t j = 0; j < M; ++j)
        s[j] = static_cast<float>(probs.v[(i - lo) * M + j]);
      per_note[all[i].first].push_back(std::move(s));
    }
  }
  for (size_t i = 0; i < notes.size(); ++i) {
    ps.note_ids.push_back(notes[i].note_id);
    ps.scores.push_back(aggregate_chunks(per_note[i]));
    ps.targets.push_back(notes[i].labels);
  }
  return ps;
}

struct TrainHParams {
  int64_t epochs = 3;
  int64_t batch_size = 32;
  double peak_lr = 2e-5;
  double warmup_proportion = 0.1;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t log_interval = 20;
};

struct EpochMetric {
  int64_t epoch = 0;
  double train_loss = 0;
  double dev_micro_auc = 0;
  double dev_macro_auc = 0;  // NaN when undefined on the dev slice
};

struct TrainResult {
  std::vector<EpochMetric> epochs;
  std::vector<std::array<double, 3>> loss_rows;  // step, lr, loss
  int64_t best_epoch = -1;
  double best_dev_micro = 0;
};

// BCE over all labels with AdamW and the warmup/decay schedule. Every chunk
// inherits its note's full label vector; the best dev-micro-AUC parameters
// are left in the model.
template <class Real>
TrainResult train_classifier(ClassifierT<Real>& model, const ClassifyDataset& data,
                             const TrainHParams& hp, uint64_t seed,
                             const LabelSpace* space_for_macro = nullptr) {
  if (data.train.empty()) throw DataError("empty training set");
  const int64_t M = model.spec.num_labels;
  Rng master(seed);
  Rng dropout_rng = master.fork(7);

  struct Item {
    size_t note;
    size_t chunk;  // unused for logreg
  };
  std::vector<Item> items;
  if (model.spec.kind == HeadKind::kLogreg) {
    for (size_t i = 0; i < data.train.size(); ++i) items.push_back({i, 0});
  } else {
    for (size_t i = 0; i < data.train.size(); ++i)
      for (size_t c = 0; c < data.train[i].chunks.size(); ++c) items.push_back({i, c});
  }

  const int64_t steps_per_epoch =
      std::max<int64_t>(1, static_cast<int64_t>(items.size()) / hp.batch_size);
  Schedule sched{hp.peak_lr, hp.epochs * steps_per_epoch, hp.warmup_proportion};

  AdamWT<Real> opt;
  opt.beta1 = hp.adam_beta1;
  opt.beta2 = hp.adam_beta2;
  opt.eps = hp.adam_eps;
  opt.weight_decay = hp.weight_decay;

  TrainResult res;
  std::vector<TensorT<Real>> best_params;
  int64_t step = 0;

  for (int64_t epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng erng = master.fork(1000 + epoch);
    std::vector<Item> order = items;
    for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[erng.uniform_int(0, i)]);

    double epoch_loss = 0;
    int64_t epoch_batches = 0;
    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      const int64_t lo = b * hp.batch_size;
      const int64_t hi = std::min<int64_t>(lo + hp.batch_size, order.size());
      const int64_t B = hi - lo;

      TensorT<Real> targets({B, M});
      for (int64_t i = 0; i < B; ++i) {
        const auto& labels = data.train[order[lo + i].note].labels;
        for (int64_t j = 0; j < M; ++j) targets.v[i * M + j] = static_cast<Real>(labels[j]);
      }

      model.zero_grad();
      VarT<Real> logits;
      if (model.spec.kind == HeadKind::kLogreg) {
        TensorT<Real> counts({B, model.spec.vocab_size});
        for (int64_t i = 0; i < B; ++i)
          for (int32_t id : data.train[order[lo + i].note].flat_ids)
            counts.v[i * model.spec.vocab_size + id] += Real(1);
        logits = model.logreg->logits(leaf(std::move(counts)));
      } else {
        std::vector<const Chunk*> batch;
        for (int64_t i = 0; i < B; ++i)
          batch.push_back(&data.train[order[lo + i].note].chunks[order[lo + i].chunk]);
        logits = classifier_logits(model, batch, true, &dropout_rng);
      }
      auto loss = bce_with_logits(logits, targets);
      if (!loss->value.all_finite())
        throw NumericError("train: non-finite loss at step " + std::to_string(step));
      backward(loss);
      opt.step(model.stores(), lr_at(std::min(step + 1, sched.total_steps), sched));

      epoch_loss += loss->value.v[0];
      ++epoch_batches;
      ++step;
      if (step % hp.log_interval == 0 || step == sched.total_steps)
        res.loss_rows.push_back(
            {static_cast<double>(step), lr_at(std::min(step, sched.total_steps), sched),
             loss->value.v[0]});
    }

    EpochMetric em;
    em.epoch = epoch;
    em.train_loss = epoch_batches ? epoch_loss / epoch_batches : 0;
    if (!data.dev.empty()) {
      auto preds = predict_set(model, data.dev);
      em.dev_micro_auc = micro_auc(preds);
      if (space_for_macro) {
        try {
          em.dev_macro_auc = macro_auc(preds, *space_for_macro);
        } catch (const DataError&) {
          em.dev_macro_auc = std::numeric_limits<double>::quiet_NaN();
        }
      } else {
        em.dev_macro_auc = std::numeric_limits<double>::quiet_NaN();
      }
    }
    res.epochs.push_back(em);
    if (data.dev.empty() || em.dev_micro_auc >= res.best_dev_micro) {
      res.best_dev_micro = em.dev_micro_auc;
      res.best_epoch = epoch;
      best_params.clear();
      for (auto* s : model.stores())
        for (const auto& it : s->items) best_params.push_back(it.var->value);
    }
  }

  if (!best_params.empty()) {
    size_t slot = 0;
    for (auto* s : model.stores())
      for (auto& it : s->items) it.var->value = best_params[slot++];
  }
  return res;
}

}  // namespace notecoder
