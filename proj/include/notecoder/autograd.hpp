#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "notecoder/tensor.hpp"

namespace notecoder {

// Reverse-mode tape node. Graphs are built eagerly by the ops in ops.hpp;
// backward() walks the topological order once.
template <class Real>
struct NodeT {
  TensorT<Real> value;
  TensorT<Real> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<NodeT>> parents;
  std::function<void(NodeT&)> backward_fn;

  TensorT<Real>& ensure_grad() {
    if (grad.v.empty()) grad = TensorT<Real>::zeros(value.shape);
    return grad;
  }
  void zero_grad() { grad = TensorT<Real>(); }
};

template <class Real>
using VarT = std::shared_ptr<NodeT<Real>>;

using Var = VarT<float>;

// When false, ops produce detached nodes: no parents, no backward closures.
// Used for inference so evaluation never grows a graph.
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class Real>
VarT<Real> leaf(TensorT<Real> value, bool requires_grad = false) {
  auto n = std::make_shared<NodeT<Real>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad && grad_mode_flag();
  return n;
}

template <class Real>
VarT<Real> make_node(TensorT<Real> value, std::vector<VarT<Real>> parents) {
  auto n = std::make_shared<NodeT<Real>>();
  n->value = std::move(value);
  if (grad_mode_flag()) {
    for (const auto& p : parents)
      if (p && p->requires_grad) {
        n->requires_grad = true;
        break;
      }
  }
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

// Backpropagate from a scalar root. Seeds the root gradient with 1.
template <class Real>
void backward(const VarT<Real>& root) {
  if (!root->requires_grad) throw DataError("backward on a node that does not require grad");
  if (root->value.numel() != 1) throw DataError("backward root must be scalar");

  std::vector<NodeT<Real>*> order;
  std::unordered_set<NodeT<Real>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<NodeT<Real>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      NodeT<Real>* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad().v[0] = Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT<Real>* n = *it;
    if (n->backward_fn && !n->grad.v.empty()) n->backward_fn(*n);
  }
}

}  // namespace notecoder
