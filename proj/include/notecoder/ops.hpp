#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "notecoder/autograd.hpp"
#include "notecoder/rng.hpp"
#include "notecoder/threading.hpp"

namespace notecoder {

namespace detail {

constexpr int64_t kParallelWork = 1 << 17;

// C[m,n] = A[m,k] * B[k,n]
template <class Real>
void mm_nn(const Real* A, const Real* B, Real* C, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
  auto body = [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      Real* c = C + i * n;
      if (!accumulate) std::fill(c, c + n, Real(0));
      const Real* a = A + i * k;
      for (int64_t kk = 0; kk < k; ++kk) {
        const Real av = a[kk];
        if (av == Real(0)) continue;
        const Real* b = B + kk * n;
        for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
      }
    }
  };
  if (m * k * n >= kParallelWork) parallel_for(m, body);
  else body(0, m);
}

// C[m,n] = A[m,k] * B[n,k]^T
template <class Real>
void mm_nt(const Real* A, const Real* B, Real* C, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
  auto body = [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const Real* a = A + i * k;
      Real* c = C + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const Real* b = B + j * k;
        Real acc = 0;
        for (int64_t kk = 0; kk < k; ++kk) acc += a[kk] * b[kk];
        if (accumulate) c[j] += acc;
        else c[j] = acc;
      }
    }
  };
  if (m * k * n >= kParallelWork) parallel_for(m, body);
  else body(0, m);
}

// C[k,n] = A[m,k]^T * B[m,n]
template <class Real>
void mm_tn(const Real* A, const Real* B, Real* C, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
  auto body = [&](int64_t lo, int64_t hi) {
    for (int64_t kk = lo; kk < hi; ++kk) {
      Real* c = C + kk * n;
      if (!accumulate) std::fill(c, c + n, Real(0));
      for (int64_t i = 0; i < m; ++i) {
        const Real av = A[i * k + kk];
        if (av == Real(0)) continue;
        const Real* b = B + i * n;
        for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
      }
    }
  };
  if (m * k * n >= kParallelWork) parallel_for(k, body);
  else body(0, k);
}

inline int64_t leading_rows(const Shape& shape) {
  int64_t r = 1;
  for (size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matrix products

template <class Real>
VarT<Real> matmul(const VarT<Real>& a, const VarT<Real>& b) {
  if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
    throw DataError("matmul dim mismatch: " + shape_str(a->value.shape) + " x " +
                    shape_str(b->value.shape));
  const int64_t m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  TensorT<Real> out({m, n});
  detail::mm_nn(a->value.data(), b->value.data(), out.data(), m, k, n, false);
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b, m, k, n](NodeT<Real>& nd) {
      if (a->requires_grad)
        detail::mm_nt(nd.grad.data(), b->value.data(), a->ensure_grad().data(), m, n, k, true);
      if (b->requires_grad)
        detail::mm_tn(a->value.data(), nd.grad.data(), b->ensure_grad().data(), m, k, n, true);
    };
  }
  return node;
}

// y[..., m] = x[..., k] * W[m,k]^T (+ bias). Leading dims are preserved.
template <class Real>
VarT<Real> linear(const VarT<Real>& x, const VarT<Real>& w, const VarT<Real>& bias = nullptr) {
  const int64_t k = x->value.shape.back();
  if (w->value.ndim() != 2 || w->value.dim(1) != k)
    throw DataError("linear dim mismatch: x " + shape_str(x->value.shape) + " W " +
                    shape_str(w->value.shape));
  const int64_t m = w->value.dim(0);
  const int64_t rows = detail::leading_rows(x->value.shape);
  if (bias && bias->value.numel() != m) throw DataError("linear bias size mismatch");

  Shape out_shape = x->value.shape;
  out_shape.back() = m;
  TensorT<Real> out(out_shape);
  detail::mm_nt(x->value.data(), w->value.data(), out.data(), rows, k, m, false);
  if (bias) {
    for (int64_t r = 0; r < rows; ++r) {
      Real* y = out.data() + r * m;
      const Real* bv = bias->value.data();
      for (int64_t j = 0; j < m; ++j) y[j] += bv[j];
    }
  }
  std::vector<VarT<Real>> parents = {x, w};
  if (bias) parents.push_back(bias);
  auto node = make_node(std::move(out), std::move(parents));
  if (node->requires_grad) {
    node->backward_fn = [x, w, bias, rows, k, m](NodeT<Real>& nd) {
      if (x->requires_grad)
        detail::mm_nn(nd.grad.data(), w->value.data(), x->ensure_grad().data(), rows, m, k, true);
      if (w->requires_grad)
        detail::mm_tn(nd.grad.data(), x->value.data(), w->ensure_grad().data(), rows, m, k, true);
      if (bias && bias->requires_grad) {
        Real* db = bias->ensure_grad().data();
        for (int64_t r = 0; r < rows; ++r) {
          const Real* g = nd.grad.data() + r * m;
          for (int64_t j = 0; j < m; ++j) db[j] += g[j];
        }
      }
    };
  }
  return node;
}

// c[B,m,n] = a[B,m,k] * b[B,k,n]
template <class Real>
VarT<Real> bmm(const VarT<Real>& a, const VarT<Real>& b) {
  if (a->value.ndim() != 3 || b->value.ndim() != 3 || a->value.dim(0) != b->value.dim(0) ||
      a->value.dim(2) != b->value.dim(1))
    throw DataError("bmm dim mismatch: " + shape_str(a->value.shape) + " x " +
                    shape_str(b->value.shape));
  const int64_t B = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2),
                n = b->value.dim(2);
  TensorT<Real> out({B, m, n});
  for (int64_t i = 0; i < B; ++i)
    detail::mm_nn(a->value.data() + i * m * k, b->value.data() + i * k * n,
                  out.data() + i * m * n, m, k, n, false);
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b, B, m, k, n](NodeT<Real>& nd) {
      for (int64_t i = 0; i < B; ++i) {
        const Real* g = nd.grad.data() + i * m * n;
        if (a->requires_grad)
          detail::mm_nt(g, b->value.data() + i * k * n, a->ensure_grad().data() + i * m * k, m, n,
                        k, true);
        if (b->requires_grad)
          detail::mm_tn(a->value.data() + i * m * k, g, b->ensure_grad().data() + i * k * n, m, k,
                        n, true);
      }
    };
  }
  return node;
}

// c[B,m,n] = a[B,m,k] * b[B,n,k]^T
template <class Real>
VarT<Real> bmm_nt(const VarT<Real>& a, const VarT<Real>& b) {
  if (a->value.ndim() != 3 || b->value.ndim() != 3 || a->value.dim(0) != b->value.dim(0) ||
      a->value.dim(2) != b->value.dim(2))
    throw DataError("bmm_nt dim mismatch: " + shape_str(a->value.shape) + " x " +
                    shape_str(b->value.shape));
  const int64_t B = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2),
                n = b->value.dim(1);
  TensorT<Real> out({B, m, n});
  for (int64_t i = 0; i < B; ++i)
    detail::mm_nt(a->value.data() + i * m * k, b->value.data() + i * n * k,
                  out.data() + i * m * n, m, k, n, false);
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b, B, m, k, n](NodeT<Real>& nd) {
      for (int64_t i = 0; i < B; ++i) {
        const Real* g = nd.grad.data() + i * m * n;
        if (a->requires_grad)
          detail::mm_nn(g, b->value.data() + i * n * k, a->ensure_grad().data() + i * m * k, m, n,
                        k, true);
        if (b->requires_grad)
          detail::mm_tn(g, a->value.data() + i * m * k, b->ensure_grad().data() + i * n * k, m, n,
                        k, true);
      }
    };
  }
  return node;
}

// c[B,m,n] = a[m,k] * b[B,n,k]^T with a shared across the batch.
template <class Real>
VarT<Real> bmm_nt_shared_a(const VarT<Real>& a, const VarT<Real>& b) {
  if (a->value.ndim() != 2 || b->value.ndim() != 3 || a->value.dim(1) != b->value.dim(2))
    throw DataError("bmm_nt_shared_a dim mismatch");
  const int64_t m = a->value.dim(0), k = a->value.dim(1), B = b->value.dim(0),
                n = b->value.dim(1);
  TensorT<Real> out({B, m, n});
  for (int64_t i = 0; i < B; ++i)
    detail::mm_nt(a->value.data(), b->value.data() + i * n * k, out.data() + i * m * n, m, k, n,
                  false);
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b, B, m, k, n](NodeT<Real>& nd) {
      for (int64_t i = 0; i < B; ++i) {
        const Real* g = nd.grad.data() + i * m * n;
        if (a->requires_grad)
          detail::mm_nn(g, b->value.data() + i * n * k, a->ensure_grad().data(), m, n, k, true);
        if (b->requires_grad)
          detail::mm_tn(g, a->value.data(), b->ensure_grad().data() + i * n * k, m, n, k, true);
      }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// shape manipulation

template <class Real>
VarT<Real> reshape(const VarT<Real>& x, Shape new_shape) {
  if (numel_of(new_shape) != x->value.numel())
    throw DataError("reshape numel mismatch: " + shape_str(x->value.shape) + " -> " +
                    shape_str(new_shape));
  TensorT<Real> out(std::move(new_shape), x->value.v);
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      auto& gx = x->ensure_grad();
      for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += nd.grad.v[i];
    };
  }
  return node;
}

// [a,b,c,d] -> [a,c,b,d]; self-inverse, used for attention head splitting.
template <class Real>
VarT<Real> permute_0213(const VarT<Real>& x) {
  if (x->value.ndim() != 4) throw DataError("permute_0213 expects a 4-d tensor");
  const int64_t A = x->value.dim(0), Bd = x->value.dim(1), C = x->value.dim(2),
                D = x->value.dim(3);
  TensorT<Real> out({A, C, Bd, D});
  const Real* src = x->value.data();
  Real* dst = out.data();
  for (int64_t a = 0; a < A; ++a)
    for (int64_t b = 0; b < Bd; ++b)
      for (int64_t c = 0; c < C; ++c)
        std::copy(src + ((a * Bd + b) * C + c) * D, src + ((a * Bd + b) * C + c + 1) * D,
                  dst + ((a * C + c) * Bd + b) * D);
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, A, Bd, C, D](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      Real* gx = x->ensure_grad().data();
      const Real* g = nd.grad.data();
      for (int64_t a = 0; a < A; ++a)
        for (int64_t c = 0; c < C; ++c)
          for (int64_t b = 0; b < Bd; ++b) {
            const Real* s = g + ((a * C + c) * Bd + b) * D;
            Real* d = gx + ((a * Bd + b) * C + c) * D;
            for (int64_t i = 0; i < D; ++i) d[i] += s[i];
          }
    };
  }
  return node;
}

// y[B,e] = x[B,T,e] at position t.
template <class Real>
VarT<Real> slice_axis1(const VarT<Real>& x, int64_t t) {
  if (x->value.ndim() != 3 || t < 0 || t >= x->value.dim(1))
    throw DataError("slice_axis1 index out of range");
  const int64_t B = x->value.dim(0), T = x->value.dim(1), E = x->value.dim(2);
  TensorT<Real> out({B, E});
  for (int64_t b = 0; b < B; ++b)
    std::copy(x->value.data() + (b * T + t) * E, x->value.data() + (b * T + t + 1) * E,
              out.data() + b * E);
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, t, B, T, E](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      Real* gx = x->ensure_grad().data();
      for (int64_t b = 0; b < B; ++b) {
        const Real* g = nd.grad.data() + b * E;
        Real* d = gx + (b * T + t) * E;
        for (int64_t i = 0; i < E; ++i) d[i] += g[i];
      }
    };
  }
  return node;
}

// y[B,T,e] from T slices of shape [B,e].
template <class Real>
VarT<Real> stack_axis1(const std::vector<VarT<Real>>& slices) {
  if (slices.empty()) throw DataError("stack_axis1 of zero slices");
  const int64_t B = slices[0]->value.dim(0), E = slices[0]->value.dim(1);
  const int64_t T = static_cast<int64_t>(slices.size());
  TensorT<Real> out({B, T, E});
  for (int64_t t = 0; t < T; ++t) {
    if (slices[t]->value.shape != Shape{B, E}) throw DataError("stack_axis1 shape mismatch");
    for (int64_t b = 0; b < B; ++b)
      std::copy(slices[t]->value.data() + b * E, slices[t]->value.data() + (b + 1) * E,
                out.data() + (b * T + t) * E);
  }
  auto node = make_node(std::move(out), std::vector<VarT<Real>>(slices));
  if (node->requires_grad) {
    node->backward_fn = [slices, B, T, E](NodeT<Real>& nd) {
      for (int64_t t = 0; t < T; ++t) {
        if (!slices[t]->requires_grad) continue;
        Real* gx = slices[t]->ensure_grad().data();
        for (int64_t b = 0; b < B; ++b) {
          const Real* g = nd.grad.data() + (b * T + t) * E;
          for (int64_t i = 0; i < E; ++i) gx[b * E + i] += g[i];
        }
      }
    };
  }
  return node;
}

template <class Real>
VarT<Real> concat_lastdim(const VarT<Real>& a, const VarT<Real>& b) {
  Shape sa = a->value.shape, sb = b->value.shape;
  if (sa.size() != sb.size()) throw DataError("concat_lastdim rank mismatch");
  for (size_t i = 0; i + 1 < sa.size(); ++i)
    if (sa[i] != sb[i]) throw DataError("concat_lastdim leading dim mismatch");
  const int64_t rows = detail::leading_rows(sa), p = sa.back(), q = sb.back();
  Shape out_shape = sa;
  out_shape.back() = p + q;
  TensorT<Real> out(out_shape);
  for (int64_t r = 0; r < rows; ++r) {
    std::copy(a->value.data() + r * p, a->value.data() + (r + 1) * p, out.data() + r * (p + q));
    std::copy(b->value.data() + r * q, b->value.data() + (r + 1) * q,
              out.data() + r * (p + q) + p);
  }
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b, rows, p, q](NodeT<Real>& nd) {
      for (int64_t r = 0; r < rows; ++r) {
        const Real* g = nd.grad.data() + r * (p + q);
        if (a->requires_grad) {
          Real* ga = a->ensure_grad().data() + r * p;
          for (int64_t i = 0; i < p; ++i) ga[i] += g[i];
        }
        if (b->requires_grad) {
          Real* gb = b->ensure_grad().data() + r * q;
          for (int64_t i = 0; i < q; ++i) gb[i] += g[p + i];
        }
      }
    };
  }
  return node;
}

// Embedding lookup: y[i,:] = table[ids[i],:]. Scatter-add on backward,
// accumulated serially in index order for determinism.
template <class Real>
VarT<Real> gather_rows(const VarT<Real>& table, std::vector<int32_t> ids) {
  if (table->value.ndim() != 2) throw DataError("gather_rows expects 2-d table");
  const int64_t V = table->value.dim(0), d = table->value.dim(1);
  const int64_t n = static_cast<int64_t>(ids.size());
  TensorT<Real> out({std::max<int64_t>(n, 1), d});
  if (n == 0) throw DataError("gather_rows with empty ids");
  for (int64_t i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= V) throw DataError("gather_rows id out of range");
    std::copy(table->value.row(ids[i]), table->value.row(ids[i]) + d, out.data() + i * d);
  }
  auto node = make_node(std::move(out), {table});
  if (node->requires_grad) {
    node->backward_fn = [table, ids = std::move(ids), d](NodeT<Real>& nd) {
      if (!table->requires_grad) return;
      Real* gt = table->ensure_grad().data();
      for (size_t i = 0; i < ids.size(); ++i) {
        const Real* g = nd.grad.data() + static_cast<int64_t>(i) * d;
        Real* dst = gt + static_cast<int64_t>(ids[i]) * d;
        for (int64_t j = 0; j < d; ++j) dst[j] += g[j];
      }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// elementwise

template <class Real>
VarT<Real> add(const VarT<Real>& a, const VarT<Real>& b) {
  if (!a->value.same_shape(b->value)) throw DataError("add shape mismatch");
  TensorT<Real> out = a->value;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->value.v[i];
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b](NodeT<Real>& nd) {
      if (a->requires_grad) {
        auto& g = a->ensure_grad();
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += nd.grad.v[i];
      }
      if (b->requires_grad) {
        auto& g = b->ensure_grad();
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += nd.grad.v[i];
      }
    };
  }
  return node;
}

template <class Real>
VarT<Real> sub(const VarT<Real>& a, const VarT<Real>& b) {
  if (!a->value.same_shape(b->value)) throw DataError("sub shape mismatch");
  TensorT<Real> out = a->value;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->value.v[i];
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b](NodeT<Real>& nd) {
      if (a->requires_grad) {
        auto& g = a->ensure_grad();
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += nd.grad.v[i];
      }
      if (b->requires_grad) {
        auto& g = b->ensure_grad();
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] -= nd.grad.v[i];
      }
    };
  }
  return node;
}

template <class Real>
VarT<Real> mul(const VarT<Real>& a, const VarT<Real>& b) {
  if (!a->value.same_shape(b->value)) throw DataError("mul shape mismatch");
  TensorT<Real> out = a->value;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->value.v[i];
  auto node = make_node(std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [a, b](NodeT<Real>& nd) {
      if (a->requires_grad) {
        auto& g = a->ensure_grad();
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += nd.grad.v[i] * b->value.v[i];
      }
      if (b->requires_grad) {
        auto& g = b->ensure_grad();
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += nd.grad.v[i] * a->value.v[i];
      }
    };
  }
  return node;
}

// y = alpha * x + beta, elementwise with scalar coefficients.
template <class Real>
VarT<Real> affine(const VarT<Real>& x, Real alpha, Real beta = Real(0)) {
  TensorT<Real> out = x->value;
  for (auto& v : out.v) v = alpha * v + beta;
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, alpha](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      auto& g = x->ensure_grad();
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += alpha * nd.grad.v[i];
    };
  }
  return node;
}

namespace detail {
template <class Real, class Fwd, class Dfn>
VarT<Real> unary_op(const VarT<Real>& x, Fwd fwd, Dfn dfn) {
  TensorT<Real> out = x->value;
  for (auto& v : out.v) v = fwd(v);
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, dfn](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      auto& g = x->ensure_grad();
      for (size_t i = 0; i < g.v.size(); ++i)
        g.v[i] += nd.grad.v[i] * dfn(x->value.v[i], nd.value.v[i]);
    };
  }
  return node;
}
}  // namespace detail

// Exact erf form: x * Phi(x).
template <class Real>
VarT<Real> gelu(const VarT<Real>& x) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return detail::unary_op(
      x,
      [](Real v) {
        return static_cast<Real>(0.5 * static_cast<double>(v) *
                                 (1.0 + std::erf(static_cast<double>(v) * inv_sqrt2)));
      },
      [](Real v, Real) {
        const double xd = static_cast<double>(v);
        const double cdf = 0.5 * (1.0 + std::erf(xd * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * xd * xd);
        return static_cast<Real>(cdf + xd * pdf);
      });
}

template <class Real>
VarT<Real> relu(const VarT<Real>& x) {
  return detail::unary_op(
      x, [](Real v) { return v > Real(0) ? v : Real(0); },
      [](Real v, Real) { return v > Real(0) ? Real(1) : Real(0); });
}

template <class Real>
VarT<Real> sigmoid(const VarT<Real>& x) {
  return detail::unary_op(
      x,
      [](Real v) {
        const double xd = static_cast<double>(v);
        return static_cast<Real>(xd >= 0 ? 1.0 / (1.0 + std::exp(-xd))
                                         : std::exp(xd) / (1.0 + std::exp(xd)));
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

template <class Real>
VarT<Real> tanh_op(const VarT<Real>& x) {
  return detail::unary_op(
      x, [](Real v) { return static_cast<Real>(std::tanh(static_cast<double>(v))); },
      [](Real, Real y) { return Real(1) - y * y; });
}

// Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).
// Identity when not training or rate == 0.
template <class Real>
VarT<Real> dropout(const VarT<Real>& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw DataError("dropout rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  const Real scale = static_cast<Real>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<Real>>(x->value.v.size());
  TensorT<Real> out = x->value;
  for (size_t i = 0; i < out.v.size(); ++i) {
    const Real m = rng.uniform() < rate ? Real(0) : scale;
    (*mask)[i] = m;
    out.v[i] *= m;
  }
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, mask](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      auto& g = x->ensure_grad();
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += nd.grad.v[i] * (*mask)[i];
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// normalization and softmax

template <class Real>
VarT<Real> layer_norm(const VarT<Real>& x, const VarT<Real>& gamma, const VarT<Real>& beta,
                      double eps = 1e-5) {
  const int64_t d = x->value.shape.back();
  if (gamma->value.numel() != d || beta->value.numel() != d)
    throw DataError("layer_norm gamma/beta size mismatch");
  const int64_t rows = detail::leading_rows(x->value.shape);
  TensorT<Real> out(x->value.shape);
  auto xhat = std::make_shared<TensorT<Real>>(x->value.shape);
  auto inv_std = std::make_shared<std::vector<Real>>(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x->value.data() + r * d;
    double mu = 0;
    for (int64_t j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = xr[j] - mu;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = static_cast<Real>(is);
    Real* xh = xhat->data() + r * d;
    Real* y = out.data() + r * d;
    for (int64_t j = 0; j < d; ++j) {
      xh[j] = static_cast<Real>((xr[j] - mu) * is);
      y[j] = gamma->value.v[j] * xh[j] + beta->value.v[j];
    }
  }
  auto node = make_node(std::move(out), {x, gamma, beta});
  if (node->requires_grad) {
    node->backward_fn = [x, gamma, beta, xhat, inv_std, rows, d](NodeT<Real>& nd) {
      for (int64_t r = 0; r < rows; ++r) {
        const Real* g = nd.grad.data() + r * d;
        const Real* xh = xhat->data() + r * d;
        if (gamma->requires_grad) {
          Real* gg = gamma->ensure_grad().data();
          for (int64_t j = 0; j < d; ++j) gg[j] += g[j] * xh[j];
        }
        if (beta->requires_grad) {
          Real* gb = beta->ensure_grad().data();
          for (int64_t j = 0; j < d; ++j) gb[j] += g[j];
        }
        if (x->requires_grad) {
          double m1 = 0, m2 = 0;
          for (int64_t j = 0; j < d; ++j) {
            const double dxh = static_cast<double>(g[j]) * gamma->value.v[j];
            m1 += dxh;
            m2 += dxh * xh[j];
          }
          m1 /= d;
          m2 /= d;
          Real* gx = x->ensure_grad().data() + r * d;
          for (int64_t j = 0; j < d; ++j) {
            const double dxh = static_cast<double>(g[j]) * gamma->value.v[j];
            gx[j] += static_cast<Real>((dxh - m1 - xh[j] * m2) * (*inv_std)[r]);
          }
        }
      }
    };
  }
  return node;
}

namespace detail {
template <class Real>
void softmax_backward_rows(const TensorT<Real>& y, const TensorT<Real>& dy, TensorT<Real>& dx,
                           int64_t rows, int64_t n) {
  for (int64_t r = 0; r < rows; ++r) {
    const Real* yr = y.data() + r * n;
    const Real* gr = dy.data() + r * n;
    double dot = 0;
    for (int64_t j = 0; j < n; ++j) dot += static_cast<double>(yr[j]) * gr[j];
    Real* d = dx.data() + r * n;
    for (int64_t j = 0; j < n; ++j)
      d[j] += static_cast<Real>(yr[j] * (static_cast<double>(gr[j]) - dot));
  }
}
}  // namespace detail

// Softmax over the last axis with max-subtraction.
template <class Real>
VarT<Real> softmax_lastdim(const VarT<Real>& x) {
  const int64_t n = x->value.shape.back();
  const int64_t rows = detail::leading_rows(x->value.shape);
  TensorT<Real> out(x->value.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x->value.data() + r * n;
    Real mx = xr[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double sum = 0;
    Real* y = out.data() + r * n;
    for (int64_t j = 0; j < n; ++j) {
      y[j] = static_cast<Real>(std::exp(static_cast<double>(xr[j] - mx)));
      sum += y[j];
    }
    const Real inv = static_cast<Real>(1.0 / sum);
    for (int64_t j = 0; j < n; ++j) y[j] *= inv;
  }
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, rows, n](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      detail::softmax_backward_rows(nd.value, nd.grad, x->ensure_grad(), rows, n);
    };
  }
  return node;
}

// Softmax over the last axis restricted to key positions with mask 1.
// Masked positions get weight exactly 0. Row r of x (viewed as [R,n]) uses
// mask row r / rows_per_mask_row.
template <class Real>
VarT<Real> masked_softmax_lastdim(const VarT<Real>& x, const TensorT<Real>& key_mask,
                                  int64_t rows_per_mask_row) {
  const int64_t n = x->value.shape.back();
  const int64_t rows = detail::leading_rows(x->value.shape);
  if (key_mask.shape.back() != n || rows_per_mask_row <= 0 ||
      rows != detail::leading_rows(key_mask.shape) * rows_per_mask_row)
    throw DataError("masked_softmax mask layout mismatch");
  TensorT<Real> out(x->value.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x->value.data() + r * n;
    const Real* m = key_mask.data() + (r / rows_per_mask_row) * n;
    Real mx = 0;
    bool any = false;
    for (int64_t j = 0; j < n; ++j)
      if (m[j] != Real(0)) {
        mx = any ? std::max(mx, xr[j]) : xr[j];
        any = true;
      }
    if (!any) throw DataError("masked_softmax: all positions masked");
    double sum = 0;
    Real* y = out.data() + r * n;
    for (int64_t j = 0; j < n; ++j) {
      if (m[j] != Real(0)) {
        y[j] = static_cast<Real>(std::exp(static_cast<double>(xr[j] - mx)));
        sum += y[j];
      } else {
        y[j] = Real(0);
      }
    }
    const Real inv = static_cast<Real>(1.0 / sum);
    for (int64_t j = 0; j < n; ++j) y[j] *= inv;
  }
  auto node = make_node(std::move(out), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, rows, n](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      // masked entries have y=0, so they receive zero gradient
      detail::softmax_backward_rows(nd.value, nd.grad, x->ensure_grad(), rows, n);
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// losses and reductions

template <class Real>
VarT<Real> mean_all(const VarT<Real>& x) {
  double s = 0;
  for (Real v : x->value.v) s += v;
  const int64_t n = x->value.numel();
  auto node = make_node(TensorT<Real>::scalar(static_cast<Real>(s / n)), {x});
  if (node->requires_grad) {
    node->backward_fn = [x, n](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      const Real g = nd.grad.v[0] / static_cast<Real>(n);
      auto& gx = x->ensure_grad();
      for (auto& v : gx.v) v += g;
    };
  }
  return node;
}

template <class Real>
VarT<Real> sum_all(const VarT<Real>& x) {
  double s = 0;
  for (Real v : x->value.v) s += v;
  auto node = make_node(TensorT<Real>::scalar(static_cast<Real>(s)), {x});
  if (node->requires_grad) {
    node->backward_fn = [x](NodeT<Real>& nd) {
      if (!x->requires_grad) return;
      const Real g = nd.grad.v[0];
      auto& gx = x->ensure_grad();
      for (auto& v : gx.v) v += g;
    };
  }
  return node;
}

// Mean binary cross-entropy from logits, computed in log-sum-exp form.
template <class Real>
VarT<Real> bce_with_logits(const VarT<Real>& logits, const TensorT<Real>& targets) {
  if (!logits->value.same_shape(targets)) throw DataError("bce_with_logits shape mismatch");
  const int64_t n = logits->value.numel();
  double loss = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double z = logits->value.v[i];
    const double t = targets.v[i];
    loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
  }
  auto targets_copy = std::make_shared<TensorT<Real>>(targets);
  auto node = make_node(TensorT<Real>::scalar(static_cast<Real>(loss / n)), {logits});
  if (node->requires_grad) {
    node->backward_fn = [logits, targets_copy, n](NodeT<Real>& nd) {
      if (!logits->requires_grad) return;
      const double g = static_cast<double>(nd.grad.v[0]) / n;
      auto& gx = logits->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        const double z = logits->value.v[i];
        const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        gx.v[i] += static_cast<Real>(g * (s - targets_copy->v[i]));
      }
    };
  }
  return node;
}

// Mean token-level cross-entropy over the positions with mask 1 (all rows
// when the mask is empty). logits is [R, V].
template <class Real>
VarT<Real> masked_cross_entropy(const VarT<Real>& logits, const std::vector<int32_t>& target_ids,
                                const std::vector<uint8_t>& position_mask = {}) {
  if (logits->value.ndim() != 2) throw DataError("masked_cross_entropy expects [R,V] logits");
  const int64_t R = logits->value.dim(0), V = logits->value.dim(1);
  if (static_cast<int64_t>(target_ids.size()) != R)
    throw DataError("masked_cross_entropy target size mismatch");
  if (!position_mask.empty() && static_cast<int64_t>(position_mask.size()) != R)
    throw DataError("masked_cross_entropy mask size mismatch");
  std::vector<int64_t> active;
  for (int64_t r = 0; r < R; ++r)
    if (position_mask.empty() || position_mask[r]) active.push_back(r);
  if (active.empty()) throw DataError("no MLM targets");

  double loss = 0;
  for (int64_t r : active) {
    const Real* z = logits->value.row(r);
    const int32_t t = target_ids[r];
    if (t < 0 || t >= V) throw DataError("masked_cross_entropy target id out of range");
    double mx = z[0];
    for (int64_t j = 1; j < V; ++j) mx = std::max(mx, static_cast<double>(z[j]));
    double sum = 0;
    for (int64_t j = 0; j < V; ++j) sum += std::exp(static_cast<double>(z[j]) - mx);
    loss += mx + std::log(sum) - static_cast<double>(z[t]);
  }
  const int64_t n_active = static_cast<int64_t>(active.size());
  auto node =
      make_node(TensorT<Real>::scalar(static_cast<Real>(loss / n_active)), {logits});
  if (node->requires_grad) {
    node->backward_fn = [logits, target_ids, active, V, n_active](NodeT<Real>& nd) {
      if (!logits->requires_grad) return;
      const double g = static_cast<double>(nd.grad.v[0]) / n_active;
      auto& gx = logits->ensure_grad();
      for (int64_t r : active) {
        const Real* z = logits->value.row(r);
        double mx = z[0];
        for (int64_t j = 1; j < V; ++j) mx = std::max(mx, static_cast<double>(z[j]));
        double sum = 0;
        for (int64_t j = 0; j < V; ++j) sum += std::exp(static_cast<double>(z[j]) - mx);
        Real* d = gx.data() + r * V;
        for (int64_t j = 0; j < V; ++j) {
          const double p = std::exp(static_cast<double>(z[j]) - mx) / sum;
          d[j] += static_cast<Real>(g * (p - (j == target_ids[r] ? 1.0 : 0.0)));
        }
      }
    };
  }
  return node;
}

}  // namespace notecoder
