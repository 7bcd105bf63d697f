#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "notecoder/errors.hpp"

namespace notecoder {

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw DataError("tensor dims must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor. Real is float in training and double in the
// verification (gradient-check) builds.
template <class Real>
struct TensorT {
  Shape shape;
  std::vector<Real> v;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(std::move(s)), v(numel_of(shape), Real(0)) {}
  TensorT(Shape s, std::vector<Real> data) : shape(std::move(s)), v(std::move(data)) {
    if (static_cast<int64_t>(v.size()) != numel_of(shape))
      throw DataError("tensor data size does not match shape " + shape_str(shape));
  }

  static TensorT zeros(Shape s) { return TensorT(std::move(s)); }
  static TensorT full(Shape s, Real value) {
    TensorT t(std::move(s));
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }
  static TensorT scalar(Real value) { return TensorT({1}, {value}); }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  size_t ndim() const { return shape.size(); }
  int64_t dim(size_t i) const { return shape.at(i); }

  Real* data() { return v.data(); }
  const Real* data() const { return v.data(); }

  Real& operator()(int64_t i) { return v[static_cast<size_t>(i)]; }
  Real operator()(int64_t i) const { return v[static_cast<size_t>(i)]; }
  Real& operator()(int64_t r, int64_t c) { return v[static_cast<size_t>(r * shape[1] + c)]; }
  Real operator()(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * shape[1] + c)]; }

  Real* row(int64_t r) { return v.data() + r * shape.back(); }
  const Real* row(int64_t r) const { return v.data() + r * shape.back(); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (Real x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <class Other>
  TensorT<Other> cast() const {
    TensorT<Other> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<Other>(v[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

template <class Real>
double max_abs_diff(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (!a.same_shape(b)) throw DataError("shape mismatch in max_abs_diff");
  double m = 0;
  for (size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::fabs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i])));
  return m;
}

}  // namespace notecoder
