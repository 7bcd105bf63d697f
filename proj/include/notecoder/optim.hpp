#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "notecoder/autograd.hpp"
#include "notecoder/tensor.hpp"

namespace notecoder {

// Named learnable tensors in insertion order. Order is the optimizer and
// checkpoint iteration order, so it must be construction-deterministic.
template <class Real>
struct ParamStoreT {
  struct Item {
    std::string name;
    VarT<Real> var;
    bool decay;  // decoupled weight decay applies (off for biases and norms)
  };
  std::vector<Item> items;
  std::unordered_map<std::string, size_t> by_name;

  VarT<Real> add(const std::string& name, TensorT<Real> init, bool decay = true) {
    if (by_name.count(name)) throw DataError("duplicate parameter name: " + name);
    auto var = leaf(std::move(init), /*requires_grad=*/true);
    var->requires_grad = true;  // params require grad even under NoGrad construction
    by_name[name] = items.size();
    items.push_back({name, var, decay});
    return var;
  }

  const VarT<Real>& get(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("unknown parameter: " + name);
    return items[it->second].var;
  }
  bool has(const std::string& name) const { return by_name.count(name) > 0; }

  void zero_grad() {
    for (auto& it : items) it.var->zero_grad();
  }

  int64_t total_numel() const {
    int64_t n = 0;
    for (const auto& it : items) n += it.var->value.numel();
    return n;
  }
};

using ParamStore = ParamStoreT<float>;

// Linear warmup to peak_lr followed by linear decay to zero.
struct Schedule {
  double peak_lr = 0;
  int64_t total_steps = 0;
  double warmup_proportion = 0.1;

  int64_t warmup_steps() const {
    return std::max<int64_t>(1, std::llround(warmup_proportion * total_steps));
  }
};

inline double lr_at(int64_t step, const Schedule& s) {
  if (s.total_steps <= 0) throw DataError("schedule total_steps must be positive");
  if (s.warmup_proportion <= 0.0 || s.warmup_proportion >= 1.0)
    throw DataError("warmup_proportion must be in (0,1)");
  if (step < 0 || step > s.total_steps) throw DataError("schedule step out of range");
  const int64_t w = s.warmup_steps();
  if (step <= w) return s.peak_lr * static_cast<double>(step) / static_cast<double>(w);
  return s.peak_lr * static_cast<double>(s.total_steps - step) /
         static_cast<double>(s.total_steps - w);
}

// AdamW: bias-corrected Adam plus decoupled weight decay applied directly to
// the weights (skipped for params registered with decay=false).
template <class Real>
struct AdamWT {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int64_t step_count = 0;

  std::vector<TensorT<Real>> m, v;

  void step(std::vector<ParamStoreT<Real>*> stores, double lr) {
    if (lr < 0) throw DataError("negative learning rate");
    if (m.empty()) {
      for (auto* s : stores)
        for (auto& it : s->items) {
          m.push_back(TensorT<Real>::zeros(it.var->value.shape));
          v.push_back(TensorT<Real>::zeros(it.var->value.shape));
        }
    }
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    size_t slot = 0;
    for (auto* s : stores) {
      for (auto& it : s->items) {
        auto& w = it.var->value;
        auto& mk = m[slot];
        auto& vk = v[slot];
        ++slot;
        if (it.var->grad.v.empty()) continue;  // param unused this step
        const auto& g = it.var->grad;
        for (size_t i = 0; i < w.v.size(); ++i) {
          const double gi = g.v[i];
          if (!std::isfinite(gi)) throw NumericError("non-finite gradient in " + it.name);
          if (it.decay && weight_decay != 0.0)
            w.v[i] -= static_cast<Real>(lr * weight_decay * w.v[i]);
          mk.v[i] = static_cast<Real>(beta1 * mk.v[i] + (1.0 - beta1) * gi);
          vk.v[i] = static_cast<Real>(beta2 * vk.v[i] + (1.0 - beta2) * gi * gi);
          const double mhat = mk.v[i] / bc1;
          const double vhat = vk.v[i] / bc2;
          w.v[i] -= static_cast<Real>(lr * mhat / (std::sqrt(vhat) + eps));
        }
      }
    }
  }
};

using AdamW = AdamWT<float>;

}  // namespace notecoder
