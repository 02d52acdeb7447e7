#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "divrep/common.hpp"
#include "divrep/math.hpp"
#include "divrep/tensor.hpp"

namespace divrep {

// Deterministic RNG with implementation-pinned distributions: std library
// distribution objects are not portable across stdlibs, so draws are built
// from raw mt19937_64 words only.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1), safe as a probit argument.
  double uniform_open() {
    double u = uniform();
    return u <= 0.0 ? 0x1.0p-53 : u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  int64_t below(int64_t n) {
    DIVREP_CHECK(n > 0, "Rng::below requires n > 0");
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
  }

  double normal() { return probit(uniform_open()); }

  // k distinct indices from [0, n), order-insensitive sampling without
  // replacement (partial Fisher–Yates).
  std::vector<int> choose_k(int n, int k) {
    DIVREP_CHECK(k >= 0 && k <= n, "choose_k out of range");
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + static_cast<int>(below(n - i));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(k));
    return idx;
  }

  template <class T>
  void fill_normal(Tensor<T>& t, double stdev = 1.0) {
    for (auto& v : t.data) v = static_cast<T>(normal() * stdev);
  }

  template <class T>
  void fill_uniform(Tensor<T>& t, double lo, double hi) {
    for (auto& v : t.data) v = static_cast<T>(uniform(lo, hi));
  }

  void shuffle(std::vector<int64_t>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(static_cast<int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace divrep
