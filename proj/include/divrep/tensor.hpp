#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "divrep/common.hpp"

namespace divrep {

// Dense row-major tensor. Small fixed rank needs only; shape is dynamic.
template <class T>
struct Tensor {
  std::vector<int64_t> shape;
  aligned_vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s, T fill = T(0)) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), fill);
  }
  Tensor(std::initializer_list<int64_t> s, T fill = T(0)) : Tensor(std::vector<int64_t>(s), fill) {}

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      DIVREP_CHECK(d >= 0, "negative dimension");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // 2-D / 4-D accessors for the common cases.
  T& at2(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
  const T& at2(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }
  T& at4(int64_t b, int64_t c, int64_t y, int64_t x) {
    return data[static_cast<size_t>(((b * shape[1] + c) * shape[2] + y) * shape[3] + x)];
  }
  const T& at4(int64_t b, int64_t c, int64_t y, int64_t x) const {
    return data[static_cast<size_t>(((b * shape[1] + c) * shape[2] + y) * shape[3] + x)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  Tensor reshaped(std::vector<int64_t> s) const {
    DIVREP_CHECK(numel_of(s) == numel(), "reshape numel mismatch");
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace divrep
