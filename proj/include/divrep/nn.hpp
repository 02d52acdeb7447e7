#pragma once

#include <string>
#include <utility>

#include "divrep/conv.hpp"
#include "divrep/rng.hpp"

namespace divrep::nn {

using ag::Var;

// Named parameter registry; names feed the checkpoint container.
template <class T>
struct ParamSet {
  std::vector<std::pair<std::string, Var<T>>> items;

  Var<T> add(const std::string& name, Tensor<T> init) {
    for (auto& [n, v] : items) DIVREP_CHECK(n != name, "duplicate parameter name: " + name);
    auto p = ag::param<T>(std::move(init));
    items.emplace_back(name, p);
    return p;
  }

  Var<T> find(const std::string& name) const {
    for (auto& [n, v] : items)
      if (n == name) return v;
    throw ArgError("unknown parameter: " + name);
  }

  std::vector<Var<T>> vars() const {
    std::vector<Var<T>> out;
    out.reserve(items.size());
    for (auto& [n, v] : items) out.push_back(v);
    return out;
  }

  int64_t count() const {
    int64_t n = 0;
    for (auto& [name, v] : items) n += v->value.numel();
    return n;
  }
};

template <class T>
Tensor<T> kaiming_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  double stdev = std::sqrt(2.0 / static_cast<double>(fan_in));
  rng.fill_normal(t, stdev);
  return t;
}

template <class T>
struct Linear {
  Var<T> w, b;
  Linear() = default;
  Linear(ParamSet<T>& ps, const std::string& name, int64_t din, int64_t dout, Rng& rng) {
    w = ps.add(name + ".w", kaiming_init<T>({din, dout}, din, rng));
    b = ps.add(name + ".b", Tensor<T>({dout}, T(0)));
  }
  Var<T> forward(const Var<T>& x) const { return ag::add_rowvec(ag::matmul(x, w), b); }
};

template <class T>
struct Conv2d {
  Var<T> w, b;
  int64_t stride = 1, pad = 1;
  Conv2d() = default;
  Conv2d(ParamSet<T>& ps, const std::string& name, int64_t cin, int64_t cout, int64_t k,
         int64_t stride_, int64_t pad_, Rng& rng)
      : stride(stride_), pad(pad_) {
    w = ps.add(name + ".w", kaiming_init<T>({cout, cin, k, k}, cin * k * k, rng));
    b = ps.add(name + ".b", Tensor<T>({cout}, T(0)));
  }
  Var<T> forward(const Var<T>& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

// ReLU MLP; no activation after the last layer.
template <class T>
struct Mlp {
  std::vector<Linear<T>> layers;
  Mlp() = default;
  Mlp(ParamSet<T>& ps, const std::string& name, int64_t din, const std::vector<int64_t>& hidden,
      int64_t dout, Rng& rng) {
    std::vector<int64_t> dims{din};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(dout);
    for (size_t i = 0; i + 1 < dims.size(); ++i)
      layers.emplace_back(ps, name + ".fc" + std::to_string(i), dims[i], dims[i + 1], rng);
  }
  Var<T> forward(Var<T> x) const {
    for (size_t i = 0; i < layers.size(); ++i) {
      x = layers[i].forward(x);
      if (i + 1 < layers.size()) x = ag::relu(x);
    }
    return x;
  }
};

template <class T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T grad_clip = T(0);  // global L2 norm clip, 0 = off
};

template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Var<T>> params, AdamConfig<T> cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto& p : params_) {
      m_.emplace_back(p->value.shape, T(0));
      v_.emplace_back(p->value.shape, T(0));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    if (cfg_.grad_clip > T(0)) clip_global_norm();
    T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      if (!p.grad_ready) continue;
      auto &m = m_[k], &v = v_[k];
      for (int64_t i = 0; i < p.value.numel(); ++i) {
        T g = p.grad[i];
        m[i] = cfg_.beta1 * m[i] + (T(1) - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (T(1) - cfg_.beta2) * g * g;
        T mhat = m[i] / bc1, vhat = v[i] / bc2;
        p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  const std::vector<Var<T>>& params() const { return params_; }
  AdamConfig<T>& config() { return cfg_; }

 private:
  void clip_global_norm() {
    double sq = 0.0;
    for (auto& p : params_) {
      if (!p->grad_ready) continue;
      for (int64_t i = 0; i < p->grad.numel(); ++i)
        sq += static_cast<double>(p->grad[i]) * static_cast<double>(p->grad[i]);
    }
    double norm = std::sqrt(sq);
    if (norm <= static_cast<double>(cfg_.grad_clip)) return;
    T s = static_cast<T>(static_cast<double>(cfg_.grad_clip) / norm);
    for (auto& p : params_) {
      if (!p->grad_ready) continue;
      for (int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= s;
    }
  }

  std::vector<Var<T>> params_;
  AdamConfig<T> cfg_;
  std::vector<Tensor<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace divrep::nn
