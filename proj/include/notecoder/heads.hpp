#pragma once

#include <string>
#include <vector>

#include "notecoder/encoder.hpp"
#include "notecoder/labels.hpp"
#include "notecoder/text.hpp"

namespace notecoder {

template <class Real>
TensorT<Real> fan_uniform_init(Rng& rng, Shape shape) {
  // Glorot-style bound from the trailing two dims (or the vector length).
  const int64_t fan_out = shape.size() >= 2 ? shape[shape.size() - 2] : 1;
  const int64_t fan_in = shape.back();
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  TensorT<Real> t(std::move(shape));
  for (auto& v : t.v) v = static_cast<Real>(rng.uniform(-bound, bound));
  return t;
}

// y = sigmoid(W_out h_cls): one shared linear readout of the CLS state.
template <class Real>
struct ClsHeadT {
  ParamStoreT<Real> store;
  VarT<Real> w_out;  // [M, d]

  static ClsHeadT init(int64_t num_labels, int64_t hidden, uint64_t seed) {
    ClsHeadT h;
    Rng rng(seed);
    h.w_out = h.store.add("head.w_out", fan_uniform_init<Real>(rng, {num_labels, hidden}));
    return h;
  }

  VarT<Real> logits(const VarT<Real>& hidden) const {
    return linear(slice_axis1(hidden, 0), w_out);
  }
};

// Label-wise attention head: per-label attention over token states followed
// by a two-layer readout whose weights are shared across labels.
//   a_ij = softmax_i <h_i, l_j>
//   c_j  = sum_i a_ij h_i
//   y_j  = sigmoid(W_a relu(W_b c_j))
template <class Real>
struct XmlHeadT {
  ParamStoreT<Real> store;
  VarT<Real> label_emb;  // [M, d]
  VarT<Real> w_b;        // [d_a, d]
  VarT<Real> w_a;        // [1, d_a]

  static XmlHeadT init(int64_t num_labels, int64_t hidden, int64_t attn_dim, uint64_t seed) {
    if (attn_dim <= 0) attn_dim = hidden;
    XmlHeadT h;
    Rng rng(seed);
    h.label_emb = h.store.add(
        "head.label_emb", EncoderT<Real>::normal_init(rng, {num_labels, hidden}));
    h.w_b = h.store.add("head.w_b", fan_uniform_init<Real>(rng, {attn_dim, hidden}));
    h.w_a = h.store.add("head.w_a", fan_uniform_init<Real>(rng, {1, attn_dim}));
    return h;
  }

  struct Out {
    VarT<Real> logits;     // [B, M]
    VarT<Real> attention;  // [B, M, N], rows sum to 1 over unmasked positions
  };

  // content_mask marks the positions labels may attend to (1 = allowed).
  Out forward(const VarT<Real>& hidden, const TensorT<Real>& content_mask) const {
    const int64_t B = hidden->value.dim(0);
    const int64_t M = label_emb->value.dim(0);
    auto scores = bmm_nt_shared_a(label_emb, hidden);                    // [B,M,N]
    auto attn = masked_softmax_lastdim(scores, content_mask, M);         // [B,M,N]
    auto ctx = bmm(attn, hidden);                                        // [B,M,d]
    auto z = linear(relu(linear(ctx, w_b)), w_a);                        // [B,M,1]
    return {reshape(z, {B, M}), attn};
  }
};

// Initial label embeddings from the encoded text of each label description:
// the mean over content positions of the last hidden layer ("contextual"),
// or the mean of raw token embedding rows ("embedding"). Labels with empty
// descriptions fall back to the init distribution; their indices are
// reported.
template <class Real>
TensorT<Real> semantic_label_init(const LabelSpace& space, const EncoderT<Real>& encoder,
                                  const Vocab& vocab, bool contextual = true,
                                  uint64_t fallback_seed = 1,
                                  std::vector<int32_t>* fallback_labels = nullptr) {
  const int64_t d = encoder.cfg.hidden_size;
  TensorT<Real> out({static_cast<int64_t>(space.size()), d});
  Rng fallback_rng(fallback_seed);
  NoGradGuard ng;
  for (int32_t j = 0; j < space.size(); ++j) {
    std::vector<std::string> toks =
        space.descriptions.empty() ? std::vector<std::string>{}
                                   : normalize_text(space.descriptions[j]);
    TokenizedNote tn = encode(toks, vocab, space.codes[j]);
    const int64_t window = encoder.cfg.max_len - 2;
    if (static_cast<int64_t>(tn.token_ids.size()) > window) tn.token_ids.resize(window);
    if (tn.token_ids.empty()) {
      for (int64_t c = 0; c < d; ++c)
        out.v[j * d + c] = static_cast<Real>(fallback_rng.normal_trunc(EncoderT<Real>::kInitStd));
      if (fallback_labels) fallback_labels->push_back(j);
      continue;
    }
    if (contextual) {
      const Chunk chunk = chunk_note(tn, encoder.cfg.max_len)[0];
      auto enc_out = encoder.forward_one(chunk);
      const auto& H = enc_out.hidden->value;  // [1,N,d]
      const int64_t n = static_cast<int64_t>(tn.token_ids.size());
      for (int64_t c = 0; c < d; ++c) {
        double s = 0;
        for (int64_t i = 0; i < n; ++i) s += H.v[(i + 1) * d + c];  // skip [CLS]
        out.v[j * d + c] = static_cast<Real>(s / n);
      }
    } else {
      const auto& table = encoder.tok_emb->value;
      const int64_t n = static_cast<int64_t>(tn.token_ids.size());
      for (int64_t c = 0; c < d; ++c) {
        double s = 0;
        for (int64_t i = 0; i < n; ++i) s += table.v[tn.token_ids[i] * d + c];
        out.v[j * d + c] = static_cast<Real>(s / n);
      }
    }
  }
  return out;
}

// Bidirectional GRU encoder with multi-head attention pooling:
//   a_ik = softmax_i <h_i, q_k>
//   c_k  = (sum_i a_ik h_i) / sqrt(d_h)   (context scaling as configured)
//   y    = sigmoid(W_a concat[c_0..c_{K-1}])
template <class Real>
struct MultiHeadBaselineT {
  int64_t emb_dim = 300;
  int64_t gru_hidden = 512;  // per direction
  int64_t num_heads = 200;
  // true: divide the context vector by sqrt(d_h); false: scale the
  // attention logits instead (the usual convention), kept for ablations.
  bool scale_context = true;

  ParamStoreT<Real> store;
  VarT<Real> emb;  // [V, emb_dim]
  struct GruParams {
    VarT<Real> wz, uz, bz, wr, ur, br, wh, uh, bh;
  };
  GruParams fwd, bwd;
  VarT<Real> queries;  // [K, 2*d_h]
  VarT<Real> w_a;      // [M, K*2*d_h]

  static MultiHeadBaselineT init(int64_t vocab_size, int64_t num_labels, int64_t emb_dim,
                                 int64_t gru_hidden, int64_t num_heads, uint64_t seed,
                                 bool scale_context = true) {
    MultiHeadBaselineT m;
    m.emb_dim = emb_dim;
    m.gru_hidden = gru_hidden;
    m.num_heads = num_heads;
    m.scale_context = scale_context;
    Rng rng(seed);
    m.emb = m.store.add("mh.emb", EncoderT<Real>::normal_init(rng, {vocab_size, emb_dim}));
    auto gru = [&](const std::string& p) {
      GruParams g;
      g.wz = m.store.add(p + ".wz", fan_uniform_init<Real>(rng, {gru_hidden, emb_dim}));
      g.uz = m.store.add(p + ".uz", fan_uniform_init<Real>(rng, {gru_hidden, gru_hidden}));
      g.bz = m.store.add(p + ".bz", TensorT<Real>::zeros({gru_hidden}), false);
      g.wr = m.store.add(p + ".wr", fan_uniform_init<Real>(rng, {gru_hidden, emb_dim}));
      g.ur = m.store.add(p + ".ur", fan_uniform_init<Real>(rng, {gru_hidden, gru_hidden}));
      g.br = m.store.add(p + ".br", TensorT<Real>::zeros({gru_hidden}), false);
      g.wh = m.store.add(p + ".wh", fan_uniform_init<Real>(rng, {gru_hidden, emb_dim}));
      g.uh = m.store.add(p + ".uh", fan_uniform_init<Real>(rng, {gru_hidden, gru_hidden}));
      g.bh = m.store.add(p + ".bh", TensorT<Real>::zeros({gru_hidden}), false);
      return g;
    };
    m.fwd = gru("mh.fwd");
    m.bwd = gru("mh.bwd");
    m.queries =
        m.store.add("mh.q", fan_uniform_init<Real>(rng, {num_heads, 2 * gru_hidden}));
    m.w_a = m.store.add(
        "mh.w_a", fan_uniform_init<Real>(rng, {num_labels, num_heads * 2 * gru_hidden}));
    return m;
  }

  VarT<Real> gru_cell(const GruParams& g, const VarT<Real>& x_t, const VarT<Real>& h_prev) const {
    auto z = sigmoid(add(linear(x_t, g.wz, g.bz), linear(h_prev, g.uz)));
    auto r = sigmoid(add(linear(x_t, g.wr, g.br), linear(h_prev, g.ur)));
    auto cand = tanh_op(add(linear(x_t, g.wh, g.bh), linear(mul(r, h_prev), g.uh)));
    // h = (1 - z) * h_prev + z * cand
    return add(mul(affine(z, Real(-1), Real(1)), h_prev), mul(z, cand));
  }

  struct Out {
    VarT<Real> logits;     // [B, M]
    VarT<Real> attention;  // [B, K, N]
  };

  Out forward(const std::vector<std::vector<int32_t>>& ids, const TensorT<Real>& mask) const {
    const int64_t B = static_cast<int64_t>(ids.size());
    if (B == 0 || ids[0].empty()) throw DataError("empty sequence");
    const int64_t N = static_cast<int64_t>(ids[0].size());
    std::vector<int32_t> flat;
    flat.reserve(B * N);
    for (const auto& seq : ids) {
      if (static_cast<int64_t>(seq.size()) != N) throw DataError("ragged baseline batch");
      flat.insert(flat.end(), seq.begin(), seq.end());
    }
    auto x = reshape(gather_rows(emb, std::move(flat)), {B, N, emb_dim});

    std::vector<VarT<Real>> h_fwd(N), h_bwd(N);
    auto h0 = leaf(TensorT<Real>::zeros({B, gru_hidden}));
    auto h = h0;
    for (int64_t t = 0; t < N; ++t) h = h_fwd[t] = gru_cell(fwd, slice_axis1(x, t), h);
    h = h0;
    for (int64_t t = N - 1; t >= 0; --t) h = h_bwd[t] = gru_cell(bwd, slice_axis1(x, t), h);

    auto H = concat_lastdim(stack_axis1(h_fwd), stack_axis1(h_bwd));  // [B,N,2dh]
    const Real inv_sqrt_dh = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(gru_hidden)));

    auto scores = bmm_nt_shared_a(queries, H);  // [B,K,N]
    if (!scale_context) scores = affine(scores, inv_sqrt_dh);
    auto attn = masked_softmax_lastdim(scores, mask, num_heads);
    auto ctx = bmm(attn, H);  // [B,K,2dh]
    if (scale_context) ctx = affine(ctx, inv_sqrt_dh);
    auto c = reshape(ctx, {B, num_heads * 2 * gru_hidden});
    return {linear(c, w_a), attn};
  }
};

// Bag-of-words logistic regression over token counts.
template <class Real>
struct BowLogRegT {
  ParamStoreT<Real> store;
  VarT<Real> w;  // [M, V]
  VarT<Real> b;  // [M]
  int64_t vocab_size = 0;

  static BowLogRegT init(int64_t vocab_size, int64_t num_labels) {
    BowLogRegT m;
    m.vocab_size = vocab_size;
    m.w = m.store.add("lr.w", TensorT<Real>::zeros({num_labels, vocab_size}));
    m.b = m.store.add("lr.b", TensorT<Real>::zeros({num_labels}), false);
    return m;
  }

  TensorT<Real> count_features(const std::vector<int32_t>& ids) const {
    TensorT<Real> f({1, vocab_size});
    for (int32_t id : ids) {
      if (id < 0 || id >= vocab_size) throw DataError("token id outside vocabulary");
      f.v[id] += Real(1);
    }
    return f;
  }

  VarT<Real> logits(const VarT<Real>& counts) const { return linear(counts, w, b); }
};

template <class Real>
TensorT<Real> sigmoid_values(const TensorT<Real>& logits) {
  TensorT<Real> out = logits;
  for (auto& v : out.v) {
    const double x = static_cast<double>(v);
    v = static_cast<Real>(x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)));
  }
  return out;
}

}  // namespace notecoder
