// Minimal dense tensor: a shape plus flat row-major storage.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "mmdiff/core.hpp"

namespace mmdiff {

using Shape = std::vector<long>;

inline long shape_numel(const Shape& s) {
  long n = 1;
  for (long d : s) {
    if (d < 0) throw config_error("negative dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

template <class S>
struct Tensor {
  Shape shape;
  std::vector<S> v;

  Tensor() = default;
  explicit Tensor(Shape sh) : shape(std::move(sh)), v(shape_numel(shape), S(0)) {}
  Tensor(Shape sh, std::vector<S> data) : shape(std::move(sh)), v(std::move(data)) {
    if (static_cast<long>(v.size()) != shape_numel(shape))
      throw config_error("tensor data size does not match shape " + shape_str(shape));
  }

  long numel() const { return static_cast<long>(v.size()); }
  S* data() { return v.data(); }
  const S* data() const { return v.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <class S2>
  Tensor<S2> cast() const {
    Tensor<S2> out(shape);
    for (long i = 0; i < numel(); ++i) out.v[i] = static_cast<S2>(v[i]);
    return out;
  }
};

template <class S>
inline void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
  if (!a.same_shape(b))
    throw config_error(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                       " vs " + shape_str(b.shape));
}

}  // namespace mmdiff
