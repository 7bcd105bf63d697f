#pragma once

#include <cmath>
#include <vector>

#include "notecoder/autograd.hpp"
#include "notecoder/errors.hpp"

namespace notecoder {

// Central finite differences against reverse-mode gradients, in double.
// f rebuilds the graph from the current parameter values on every call and
// must be deterministic (seed any internal randomness).
// Returns the max relative error, denominator max(|analytic|, |fd|, 1e-8).
template <class F>
double grad_check(F&& f, const std::vector<VarT<double>>& params, double eps = 1e-4) {
  for (auto& p : params) p->zero_grad();
  auto loss = f();
  if (!loss->value.all_finite()) throw NumericError("grad_check: non-finite loss");
  backward(loss);

  std::vector<TensorT<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params)
    analytic.push_back(p->grad.v.empty() ? TensorT<double>::zeros(p->value.shape) : p->grad);

  double max_rel = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& x = params[pi]->value;
    for (size_t i = 0; i < x.v.size(); ++i) {
      const double orig = x.v[i];
      x.v[i] = orig + eps;
      const double lp = f()->value.v[0];
      x.v[i] = orig - eps;
      const double lm = f()->value.v[0];
      x.v[i] = orig;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw NumericError("grad_check: non-finite perturbed loss");
      const double fd = (lp - lm) / (2 * eps);
      const double an = analytic[pi].v[i];
      const double denom = std::max({std::fabs(an), std::fabs(fd), 1e-8});
      max_rel = std::max(max_rel, std::fabs(an - fd) / denom);
    }
  }
  for (auto& p : params) p->zero_grad();
  return max_rel;
}

}  // namespace notecoder
