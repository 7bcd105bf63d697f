#pragma once

#include <string>
#include <vector>

#include "notecoder/chunk.hpp"
#include "notecoder/encoder_config.hpp"
#include "notecoder/ops.hpp"
#include "notecoder/optim.hpp"

namespace notecoder {

template <class Real>
struct EncoderOutT {
  VarT<Real> hidden;       // [B, N, d] last-layer states
  TensorT<Real> mask;      // [B, N] 1 for real tokens
  // captured per layer as [B, heads, N, N]; rows over unmasked keys sum to 1
  std::vector<TensorT<Real>> attentions;
};

// Post-norm transformer encoder with learned absolute positions, plus the
// masked-LM and next-sentence output heads used during pretraining.
template <class Real>
struct EncoderT {
  EncoderConfig cfg;
  ParamStoreT<Real> store;

  VarT<Real> tok_emb, pos_emb, seg_emb, emb_ln_g, emb_ln_b;
  struct Layer {
    VarT<Real> wq, bq, wk, bk, wv, bv, wo, bo;
    VarT<Real> ln1_g, ln1_b;
    VarT<Real> w1, b1, w2, b2;
    VarT<Real> ln2_g, ln2_b;
  };
  std::vector<Layer> layers;
  VarT<Real> mlm_w, mlm_b, mlm_ln_g, mlm_ln_b, mlm_dec_w, mlm_dec_b;
  VarT<Real> nsp_w, nsp_b;

  static constexpr double kInitStd = 0.02;

  static EncoderT init(const EncoderConfig& config, uint64_t seed) {
    config.validate();
    EncoderT e;
    e.cfg = config;
    Rng rng(seed);
    const int64_t d = config.hidden_size;

    e.tok_emb = e.store.add("tok_emb", normal_init(rng, {config.vocab_size, d}));
    e.pos_emb = e.store.add("pos_emb", normal_init(rng, {config.max_len, d}));
    e.seg_emb = e.store.add("seg_emb", normal_init(rng, {config.segment_types, d}));
    e.emb_ln_g = e.store.add("emb_ln_g", TensorT<Real>::full({d}, Real(1)), false);
    e.emb_ln_b = e.store.add("emb_ln_b", TensorT<Real>::zeros({d}), false);

    for (int64_t l = 0; l < config.num_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer lay;
      lay.wq = e.store.add(p + "wq", normal_init(rng, {d, d}));
      lay.bq = e.store.add(p + "bq", TensorT<Real>::zeros({d}), false);
      lay.wk = e.store.add(p + "wk", normal_init(rng, {d, d}));
      lay.bk = e.store.add(p + "bk", TensorT<Real>::zeros({d}), false);
      lay.wv = e.store.add(p + "wv", normal_init(rng, {d, d}));
      lay.bv = e.store.add(p + "bv", TensorT<Real>::zeros({d}), false);
      lay.wo = e.store.add(p + "wo", normal_init(rng, {d, d}));
      lay.bo = e.store.add(p + "bo", TensorT<Real>::zeros({d}), false);
      lay.ln1_g = e.store.add(p + "ln1_g", TensorT<Real>::full({d}, Real(1)), false);
      lay.ln1_b = e.store.add(p + "ln1_b", TensorT<Real>::zeros({d}), false);
      lay.w1 = e.store.add(p + "w1", normal_init(rng, {config.intermediate_size, d}));
      lay.b1 = e.store.add(p + "b1", TensorT<Real>::zeros({config.intermediate_size}), false);
      lay.w2 = e.store.add(p + "w2", normal_init(rng, {d, config.intermediate_size}));
      lay.b2 = e.store.add(p + "b2", TensorT<Real>::zeros({d}), false);
      lay.ln2_g = e.store.add(p + "ln2_g", TensorT<Real>::full({d}, Real(1)), false);
      lay.ln2_b = e.store.add(p + "ln2_b", TensorT<Real>::zeros({d}), false);
      e.layers.push_back(std::move(lay));
    }

    e.mlm_w = e.store.add("mlm.w", normal_init(rng, {d, d}));
    e.mlm_b = e.store.add("mlm.b", TensorT<Real>::zeros({d}), false);
    e.mlm_ln_g = e.store.add("mlm.ln_g", TensorT<Real>::full({d}, Real(1)), false);
    e.mlm_ln_b = e.store.add("mlm.ln_b", TensorT<Real>::zeros({d}), false);
    e.mlm_dec_w = e.store.add("mlm.dec_w", normal_init(rng, {config.vocab_size, d}));
    e.mlm_dec_b = e.store.add("mlm.dec_b", TensorT<Real>::zeros({config.vocab_size}), false);
    e.nsp_w = e.store.add("nsp.w", normal_init(rng, {1, d}));
    e.nsp_b = e.store.add("nsp.b", TensorT<Real>::zeros({1}), false);
    return e;
  }

  static TensorT<Real> normal_init(Rng& rng, Shape shape) {
    TensorT<Real> t(std::move(shape));
    for (auto& v : t.v) v = static_cast<Real>(rng.normal_trunc(kInitStd));
    return t;
  }

  // Token + position + segment embeddings, layer norm, dropout.
  VarT<Real> embed(const std::vector<const Chunk*>& batch, bool training, Rng* dropout_rng) const {
    const int64_t B = static_cast<int64_t>(batch.size());
    if (B == 0) throw DataError("empty batch");
    const int64_t N = batch[0]->max_len();
    if (N > cfg.max_len) throw DataError("chunk longer than encoder max_len");
    std::vector<int32_t> ids, pos, seg;
    ids.reserve(B * N);
    pos.reserve(B * N);
    seg.reserve(B * N);
    for (const Chunk* c : batch) {
      if (c->max_len() != N) throw DataError("chunks in a batch must share max_len");
      for (int64_t i = 0; i < N; ++i) {
        ids.push_back(c->ids[i]);
        pos.push_back(static_cast<int32_t>(i));
        seg.push_back(c->segments[i]);
      }
    }
    auto x = add(add(gather_rows(tok_emb, std::move(ids)), gather_rows(pos_emb, std::move(pos))),
                 gather_rows(seg_emb, std::move(seg)));
    x = layer_norm(x, emb_ln_g, emb_ln_b);
    if (training) {
      if (!dropout_rng) throw DataError("training forward needs a dropout rng");
      x = dropout(x, cfg.hidden_dropout, *dropout_rng, true);
    }
    return reshape(x, {B, N, cfg.hidden_size});
  }

  TensorT<Real> batch_mask(const std::vector<const Chunk*>& batch) const {
    const int64_t B = static_cast<int64_t>(batch.size());
    const int64_t N = batch[0]->max_len();
    TensorT<Real> mask({B, N});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t i = 0; i < N; ++i) mask.v[b * N + i] = static_cast<Real>(batch[b]->mask[i]);
    return mask;
  }

  EncoderOutT<Real> forward(const std::vector<const Chunk*>& batch, bool training = false,
                            Rng* dropout_rng = nullptr, bool capture_attention = false) const {
    EncoderOutT<Real> out;
    out.mask = batch_mask(batch);
    const int64_t B = static_cast<int64_t>(batch.size());
    const int64_t N = batch[0]->max_len();
    const int64_t d = cfg.hidden_size, h = cfg.num_heads, dh = cfg.head_dim();

    auto x = embed(batch, training, dropout_rng);
    for (const Layer& lay : layers) {
      auto split_heads = [&](const VarT<Real>& t) {
        return reshape(permute_0213(reshape(t, {B, N, h, dh})), {B * h, N, dh});
      };
      auto q = split_heads(linear(x, lay.wq, lay.bq));
      auto k = split_heads(linear(x, lay.wk, lay.bk));
      auto v = split_heads(linear(x, lay.wv, lay.bv));

      auto scores = affine(bmm_nt(q, k), static_cast<Real>(1.0 / std::sqrt(double(dh))));
      auto attn = masked_softmax_lastdim(scores, out.mask, /*rows_per_mask_row=*/h * N);
      if (capture_attention) {
        TensorT<Real> a = attn->value;
        a.shape = {B, h, N, N};
        out.attentions.push_back(std::move(a));
      }
      if (training) attn = dropout(attn, cfg.attention_dropout, *dropout_rng, true);

      auto ctx = reshape(permute_0213(reshape(bmm(attn, v), {B, h, N, dh})), {B, N, d});
      auto attn_out = linear(ctx, lay.wo, lay.bo);
      if (training) attn_out = dropout(attn_out, cfg.hidden_dropout, *dropout_rng, true);
      x = layer_norm(add(x, attn_out), lay.ln1_g, lay.ln1_b);

      auto ff = linear(gelu(linear(x, lay.w1, lay.b1)), lay.w2, lay.b2);
      if (training) ff = dropout(ff, cfg.hidden_dropout, *dropout_rng, true);
      x = layer_norm(add(x, ff), lay.ln2_g, lay.ln2_b);
    }
    out.hidden = x;
    return out;
  }

  EncoderOutT<Real> forward_one(const Chunk& chunk, bool training = false,
                                Rng* dropout_rng = nullptr, bool capture_attention = false) const {
    return forward({&chunk}, training, dropout_rng, capture_attention);
  }

  // Logits over the vocabulary for the given rows of flattened hidden
  // states [B*N, d].
  VarT<Real> mlm_logits(const VarT<Real>& hidden_rows) const {
    auto t = layer_norm(gelu(linear(hidden_rows, mlm_w, mlm_b)), mlm_ln_g, mlm_ln_b);
    return linear(t, mlm_dec_w, mlm_dec_b);
  }

  // One next-sentence logit per sequence from the (CLS) state.
  VarT<Real> nsp_logits(const VarT<Real>& hidden) const {
    return linear(slice_axis1(hidden, 0), nsp_w, nsp_b);
  }
};

using Encoder = EncoderT<float>;

// Grows the positional table: rows below the old max are copied bit-exactly,
// new rows are drawn from the init distribution.
template <class Real>
void extend_positions(EncoderT<Real>& enc, int64_t new_max, uint64_t seed) {
  if (new_max <= enc.cfg.max_len) throw DataError("extend_positions: new_max must exceed current");
  Rng rng(seed);
  TensorT<Real> grown({new_max, enc.cfg.hidden_size});
  const auto& old = enc.pos_emb->value;
  std::copy(old.v.begin(), old.v.end(), grown.v.begin());
  for (int64_t i = old.numel(); i < grown.numel(); ++i)
    grown.v[i] = static_cast<Real>(rng.normal_trunc(EncoderT<Real>::kInitStd));
  enc.pos_emb->value = std::move(grown);
  enc.cfg.max_len = new_max;
}

}  // namespace notecoder
