#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>

#include "divrep/autodiff.hpp"

namespace divrep::ag {

template <class T>
using MatM = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using CMatM = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  DIVREP_CHECK(a->value.same_shape(b->value), "add shape mismatch");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  DIVREP_CHECK(a->value.same_shape(b->value), "sub shape mismatch");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  DIVREP_CHECK(a->value.same_shape(b->value), "mul shape mismatch");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * pa.value[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v *= c;
  return make_op<T>(std::move(out), {a}, [c](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += c * n.grad[i];
  });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T c) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v += c;
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

template <class T>
Var<T> neg(const Var<T>& a) {
  return scale(a, T(-1));
}

template <class T>
Var<T> vexp(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = std::exp(v);
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * n.value[i];
  });
}

template <class T>
Var<T> vsqrt(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = std::sqrt(std::max(v, T(0)));
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      T denom = std::max(n.value[i], T(1e-12));
      g[i] += n.grad[i] * T(0.5) / denom;
    }
  });
}

template <class T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i)
      if (p.value[i] > T(0)) g[i] += n.grad[i];
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      T s = n.value[i];
      g[i] += n.grad[i] * s * (T(1) - s);
    }
  });
}

template <class T>
Var<T> vtanh(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = std::tanh(v);
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      T t = n.value[i];
      g[i] += n.grad[i] * (T(1) - t * t);
    }
  });
}

// Gradient passes only strictly inside the interval.
template <class T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = std::min(std::max(v, lo), hi);
  return make_op<T>(std::move(out), {a}, [lo, hi](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i)
      if (p.value[i] > lo && p.value[i] < hi) g[i] += n.grad[i];
  });
}

// a*(1-m) + b*m with a constant mask; routing primitive behind latent swaps.
template <class T>
Var<T> mix(const Var<T>& a, const Var<T>& b, Tensor<T> mask) {
  DIVREP_CHECK(a->value.same_shape(b->value) && a->value.same_shape(mask), "mix shape mismatch");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = a->value[i] * (T(1) - mask[i]) + b->value[i] * mask[i];
  auto m = std::make_shared<Tensor<T>>(std::move(mask));
  return make_op<T>(std::move(out), {a, b}, [m](Node<T>& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (T(1) - (*m)[i]);
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (*m)[i];
    }
  });
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

template <class T>
Var<T> reshape(const Var<T>& a, std::vector<int64_t> shape) {
  Tensor<T> out = a->value.reshaped(shape);
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

template <class T>
Var<T> slice_cols(const Var<T>& a, int64_t c0, int64_t c1) {
  DIVREP_CHECK(a->value.rank() == 2, "slice_cols expects 2-D");
  int64_t B = a->value.dim(0), D = a->value.dim(1);
  DIVREP_CHECK(0 <= c0 && c0 < c1 && c1 <= D, "slice_cols range");
  Tensor<T> out({B, c1 - c0});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = c0; c < c1; ++c) out.at2(b, c - c0) = a->value.at2(b, c);
  return make_op<T>(std::move(out), {a}, [c0, c1](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    int64_t B = n.value.dim(0);
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = c0; c < c1; ++c) g.at2(b, c) += n.grad.at2(b, c - c0);
  });
}

template <class T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  DIVREP_CHECK(a->value.rank() == 2 && b->value.rank() == 2 && a->value.dim(0) == b->value.dim(0),
               "concat_cols expects matching 2-D");
  int64_t B = a->value.dim(0), Da = a->value.dim(1), Db = b->value.dim(1);
  Tensor<T> out({B, Da + Db});
  for (int64_t r = 0; r < B; ++r) {
    for (int64_t c = 0; c < Da; ++c) out.at2(r, c) = a->value.at2(r, c);
    for (int64_t c = 0; c < Db; ++c) out.at2(r, Da + c) = b->value.at2(r, c);
  }
  return make_op<T>(std::move(out), {a, b}, [Da, Db](Node<T>& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    int64_t B = n.value.dim(0);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (int64_t r = 0; r < B; ++r)
        for (int64_t c = 0; c < Da; ++c) g.at2(r, c) += n.grad.at2(r, c);
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (int64_t r = 0; r < B; ++r)
        for (int64_t c = 0; c < Db; ++c) g.at2(r, c) += n.grad.at2(r, Da + c);
    }
  });
}

// ---------------------------------------------------------------------------
// rows / groups
// ---------------------------------------------------------------------------

template <class T>
Var<T> add_rowvec(const Var<T>& x, const Var<T>& bias) {
  DIVREP_CHECK(x->value.rank() == 2 && bias->value.rank() == 1 &&
                   x->value.dim(1) == bias->value.dim(0),
               "add_rowvec shapes");
  int64_t B = x->value.dim(0), D = x->value.dim(1);
  Tensor<T> out = x->value;
  for (int64_t r = 0; r < B; ++r)
    for (int64_t c = 0; c < D; ++c) out.at2(r, c) += bias->value[c];
  return make_op<T>(std::move(out), {x, bias}, [](Node<T>& n) {
    auto &px = *n.parents[0], &pb = *n.parents[1];
    int64_t B = n.value.dim(0), D = n.value.dim(1);
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (int64_t r = 0; r < B; ++r)
        for (int64_t c = 0; c < D; ++c) g[c] += n.grad.at2(r, c);
    }
  });
}

template <class T>
Var<T> l2norm_rows(const Var<T>& x, T eps = T(1e-8)) {
  DIVREP_CHECK(x->value.rank() == 2, "l2norm_rows expects 2-D");
  int64_t B = x->value.dim(0), D = x->value.dim(1);
  Tensor<T> out({B, D});
  auto norms = std::make_shared<std::vector<T>>(static_cast<size_t>(B));
  for (int64_t r = 0; r < B; ++r) {
    T s = T(0);
    for (int64_t c = 0; c < D; ++c) s += x->value.at2(r, c) * x->value.at2(r, c);
    T norm = std::max(std::sqrt(s), eps);
    (*norms)[static_cast<size_t>(r)] = norm;
    for (int64_t c = 0; c < D; ++c) out.at2(r, c) = x->value.at2(r, c) / norm;
  }
  return make_op<T>(std::move(out), {x}, [norms](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    int64_t B = n.value.dim(0), D = n.value.dim(1);
    for (int64_t r = 0; r < B; ++r) {
      T dot = T(0);
      for (int64_t c = 0; c < D; ++c) dot += n.value.at2(r, c) * n.grad.at2(r, c);
      T inv = T(1) / (*norms)[static_cast<size_t>(r)];
      for (int64_t c = 0; c < D; ++c)
        g.at2(r, c) += (n.grad.at2(r, c) - n.value.at2(r, c) * dot) * inv;
    }
  });
}

// Per-group row means; groups with no members yield zero rows.
template <class T>
Var<T> group_mean(const Var<T>& x, std::vector<int> group_ids, int num_groups) {
  DIVREP_CHECK(x->value.rank() == 2, "group_mean expects 2-D");
  int64_t B = x->value.dim(0), D = x->value.dim(1);
  DIVREP_CHECK(static_cast<int64_t>(group_ids.size()) == B, "group_mean ids size");
  auto ids = std::make_shared<std::vector<int>>(std::move(group_ids));
  auto counts = std::make_shared<std::vector<int>>(static_cast<size_t>(num_groups), 0);
  for (int g : *ids) {
    DIVREP_CHECK(g >= 0 && g < num_groups, "group id out of range");
    ++(*counts)[static_cast<size_t>(g)];
  }
  Tensor<T> out({static_cast<int64_t>(num_groups), D});
  for (int64_t r = 0; r < B; ++r) {
    int g = (*ids)[static_cast<size_t>(r)];
    for (int64_t c = 0; c < D; ++c) out.at2(g, c) += x->value.at2(r, c);
  }
  for (int g = 0; g < num_groups; ++g) {
    int cnt = (*counts)[static_cast<size_t>(g)];
    if (cnt > 0)
      for (int64_t c = 0; c < D; ++c) out.at2(g, c) /= static_cast<T>(cnt);
  }
  return make_op<T>(std::move(out), {x}, [ids, counts](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    int64_t D = n.value.dim(1);
    for (size_t r = 0; r < ids->size(); ++r) {
      int grp = (*ids)[r];
      T inv = T(1) / static_cast<T>((*counts)[static_cast<size_t>(grp)]);
      for (int64_t c = 0; c < D; ++c)
        g.at2(static_cast<int64_t>(r), c) += n.grad.at2(grp, c) * inv;
    }
  });
}

template <class T>
Var<T> gather_rows(const Var<T>& x, std::vector<int> row_ids) {
  DIVREP_CHECK(x->value.rank() == 2, "gather_rows expects 2-D");
  int64_t G = x->value.dim(0), D = x->value.dim(1);
  auto ids = std::make_shared<std::vector<int>>(std::move(row_ids));
  Tensor<T> out({static_cast<int64_t>(ids->size()), D});
  for (size_t r = 0; r < ids->size(); ++r) {
    int src = (*ids)[r];
    DIVREP_CHECK(src >= 0 && src < G, "gather_rows id out of range");
    for (int64_t c = 0; c < D; ++c) out.at2(static_cast<int64_t>(r), c) = x->value.at2(src, c);
  }
  return make_op<T>(std::move(out), {x}, [ids](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    int64_t D = n.value.dim(1);
    for (size_t r = 0; r < ids->size(); ++r) {
      int src = (*ids)[r];
      for (int64_t c = 0; c < D; ++c) g.at2(src, c) += n.grad.at2(static_cast<int64_t>(r), c);
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  DIVREP_CHECK(a->value.rank() == 2 && b->value.rank() == 2 && a->value.dim(1) == b->value.dim(0),
               "matmul shapes");
  int64_t m = a->value.dim(0), k = a->value.dim(1), n2 = b->value.dim(1);
  Tensor<T> out({m, n2});
  CMatM<T> A(a->value.ptr(), m, k), B(b->value.ptr(), k, n2);
  MatM<T> C(out.ptr(), m, n2);
  C.noalias() = A * B;
  return make_op<T>(std::move(out), {a, b}, [m, k, n2](Node<T>& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    CMatM<T> G(n.grad.ptr(), m, n2);
    CMatM<T> A(pa.value.ptr(), m, k), B(pb.value.ptr(), k, n2);
    if (pa.requires_grad) {
      MatM<T> dA(pa.ensure_grad().ptr(), m, k);
      dA.noalias() += G * B.transpose();
    }
    if (pb.requires_grad) {
      MatM<T> dB(pb.ensure_grad().ptr(), k, n2);
      dB.noalias() += A.transpose() * G;
    }
  });
}

// a [m,k] x b[n,k]^T -> [m,n]
template <class T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  DIVREP_CHECK(a->value.rank() == 2 && b->value.rank() == 2 && a->value.dim(1) == b->value.dim(1),
               "matmul_nt shapes");
  int64_t m = a->value.dim(0), k = a->value.dim(1), n2 = b->value.dim(0);
  Tensor<T> out({m, n2});
  CMatM<T> A(a->value.ptr(), m, k), B(b->value.ptr(), n2, k);
  MatM<T> C(out.ptr(), m, n2);
  C.noalias() = A * B.transpose();
  return make_op<T>(std::move(out), {a, b}, [m, k, n2](Node<T>& n) {
    auto &pa = *n.parents[0], &pb = *n.parents[1];
    CMatM<T> G(n.grad.ptr(), m, n2);
    CMatM<T> A(pa.value.ptr(), m, k), B(pb.value.ptr(), n2, k);
    if (pa.requires_grad) {
      MatM<T> dA(pa.ensure_grad().ptr(), m, k);
      dA.noalias() += G * B;
    }
    if (pb.requires_grad) {
      MatM<T> dB(pb.ensure_grad().ptr(), n2, k);
      dB.noalias() += G.transpose() * A;
    }
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class T>
Var<T> sum_all(const Var<T>& a) {
  Tensor<T> out({1});
  T s = T(0);
  for (T v : a->value.data) s += v;
  out[0] = s;
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
  });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
  int64_t n = a->value.numel();
  return scale(sum_all(a), T(1) / static_cast<T>(n));
}

// ---------------------------------------------------------------------------
// fused losses (targets are constants; batch dim is shape[0])
// ---------------------------------------------------------------------------

template <class T>
Var<T> sigmoid_bce_sum_mean(const Var<T>& logits, Tensor<T> target) {
  DIVREP_CHECK(logits->value.same_shape(target), "bce target shape");
  int64_t B = logits->value.dim(0);
  auto tgt = std::make_shared<Tensor<T>>(std::move(target));
  double acc = 0.0;
  for (int64_t i = 0; i < logits->value.numel(); ++i) {
    double l = logits->value[i], t = (*tgt)[i];
    acc += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc / static_cast<double>(B));
  return make_op<T>(std::move(out), {logits}, [tgt, B](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    T invb = n.grad[0] / static_cast<T>(B);
    for (int64_t i = 0; i < g.numel(); ++i) {
      T s = T(1) / (T(1) + std::exp(-p.value[i]));
      g[i] += (s - (*tgt)[i]) * invb;
    }
  });
}

// Binary KL of a constant target against predicted probabilities: the
// cross-entropy excess over the target's own entropy floor. Zero iff equal.
template <class T>
Var<T> binary_kl_sum_mean(const Var<T>& probs, Tensor<T> target, T eps = T(1e-6)) {
  DIVREP_CHECK(probs->value.same_shape(target), "binary_kl target shape");
  int64_t B = probs->value.dim(0);
  auto tgt = std::make_shared<Tensor<T>>(std::move(target));
  double acc = 0.0;
  for (int64_t i = 0; i < probs->value.numel(); ++i) {
    double p = std::min<double>(std::max<double>(probs->value[i], eps), 1.0 - eps);
    double t = (*tgt)[i];
    if (t > 0.0) acc += t * std::log(t / p);
    if (t < 1.0) acc += (1.0 - t) * std::log((1.0 - t) / (1.0 - p));
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc / static_cast<double>(B));
  return make_op<T>(std::move(out), {probs}, [tgt, B, eps](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    T invb = n.grad[0] / static_cast<T>(B);
    for (int64_t i = 0; i < g.numel(); ++i) {
      T pc = std::min(std::max(p.value[i], eps), T(1) - eps);
      T t = (*tgt)[i];
      g[i] += (-t / pc + (T(1) - t) / (T(1) - pc)) * invb;
    }
  });
}

template <class T>
Var<T> mse_sum_mean(const Var<T>& pred, Tensor<T> target) {
  DIVREP_CHECK(pred->value.same_shape(target), "mse target shape");
  int64_t B = pred->value.dim(0);
  auto tgt = std::make_shared<Tensor<T>>(std::move(target));
  double acc = 0.0;
  for (int64_t i = 0; i < pred->value.numel(); ++i) {
    double d = pred->value[i] - (*tgt)[i];
    acc += d * d;
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc / static_cast<double>(B));
  return make_op<T>(std::move(out), {pred}, [tgt, B](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    T invb = n.grad[0] / static_cast<T>(B);
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += T(2) * (p.value[i] - (*tgt)[i]) * invb;
  });
}

// sum_d 0.5*(mu^2 + exp(lv) - 1 - lv), averaged over rows.
template <class T>
Var<T> gauss_kl_prior_mean(const Var<T>& mu, const Var<T>& logvar) {
  DIVREP_CHECK(mu->value.same_shape(logvar->value) && mu->value.rank() == 2, "kl shapes");
  int64_t B = mu->value.dim(0);
  double acc = 0.0;
  for (int64_t i = 0; i < mu->value.numel(); ++i) {
    double m = mu->value[i], lv = logvar->value[i];
    acc += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc / static_cast<double>(B));
  return make_op<T>(std::move(out), {mu, logvar}, [B](Node<T>& n) {
    auto &pm = *n.parents[0], &pl = *n.parents[1];
    T invb = n.grad[0] / static_cast<T>(B);
    if (pm.requires_grad) {
      auto& g = pm.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += pm.value[i] * invb;
    }
    if (pl.requires_grad) {
      auto& g = pl.ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i)
        g[i] += T(0.5) * (std::exp(pl.value[i]) - T(1)) * invb;
    }
  });
}

template <class T>
Var<T> softmax_ce_mean(const Var<T>& logits, std::vector<int> labels) {
  DIVREP_CHECK(logits->value.rank() == 2, "ce expects 2-D logits");
  int64_t B = logits->value.dim(0), K = logits->value.dim(1);
  DIVREP_CHECK(static_cast<int64_t>(labels.size()) == B, "ce labels size");
  auto lab = std::make_shared<std::vector<int>>(std::move(labels));
  double acc = 0.0;
  for (int64_t r = 0; r < B; ++r) {
    double m = -1e30;
    for (int64_t c = 0; c < K; ++c) m = std::max(m, static_cast<double>(logits->value.at2(r, c)));
    double lse = 0.0;
    for (int64_t c = 0; c < K; ++c) lse += std::exp(static_cast<double>(logits->value.at2(r, c)) - m);
    int y = (*lab)[static_cast<size_t>(r)];
    DIVREP_CHECK(y >= 0 && y < K, "ce label out of range");
    acc += m + std::log(lse) - static_cast<double>(logits->value.at2(r, y));
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc / static_cast<double>(B));
  return make_op<T>(std::move(out), {logits}, [lab](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    int64_t B = p.value.dim(0), K = p.value.dim(1);
    T invb = n.grad[0] / static_cast<T>(B);
    for (int64_t r = 0; r < B; ++r) {
      T m = p.value.at2(r, 0);
      for (int64_t c = 1; c < K; ++c) m = std::max(m, p.value.at2(r, c));
      T z = T(0);
      for (int64_t c = 0; c < K; ++c) z += std::exp(p.value.at2(r, c) - m);
      for (int64_t c = 0; c < K; ++c) {
        T soft = std::exp(p.value.at2(r, c) - m) / z;
        T onehot = (c == (*lab)[static_cast<size_t>(r)]) ? T(1) : T(0);
        g.at2(r, c) += (soft - onehot) * invb;
      }
    }
  });
}

// Supervised contrastive loss on L2-normalized features. Anchors without a
// positive are skipped; a batch of singletons yields 0 with a warning.
template <class T>
Var<T> supcon_loss(const Var<T>& features, std::vector<int> labels, T tau, bool warn = true) {
  DIVREP_CHECK(features->value.rank() == 2, "supcon expects 2-D features");
  int64_t B = features->value.dim(0), D = features->value.dim(1);
  DIVREP_CHECK(static_cast<int64_t>(labels.size()) == B, "supcon labels size");
  DIVREP_CHECK(B >= 2, "supcon needs at least 2 samples");
  DIVREP_CHECK(tau > T(0), "supcon tau must be positive");
  auto lab = std::make_shared<std::vector<int>>(std::move(labels));

  // positives per anchor
  std::vector<int> pos_count(static_cast<size_t>(B), 0);
  bool any_positive = false;
  for (int64_t i = 0; i < B; ++i) {
    for (int64_t j = 0; j < B; ++j)
      if (j != i && (*lab)[static_cast<size_t>(j)] == (*lab)[static_cast<size_t>(i)])
        ++pos_count[static_cast<size_t>(i)];
    if (pos_count[static_cast<size_t>(i)] > 0) any_positive = true;
  }
  if (!any_positive) {
    if (warn) std::cerr << "supcon_loss: all-singleton batch, loss defined as 0\n";
    return constant<T>(Tensor<T>({1}, T(0)));
  }

  // similarity matrix S = F F^T / tau
  std::vector<double> S(static_cast<size_t>(B * B));
  {
    CMatM<T> F(features->value.ptr(), B, D);
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sims =
        F * F.transpose() / tau;
    for (int64_t i = 0; i < B * B; ++i) S[static_cast<size_t>(i)] = sims.data()[i];
  }
  auto dS = std::make_shared<aligned_vector<T>>(static_cast<size_t>(B * B), T(0));
  double total = 0.0;
  for (int64_t i = 0; i < B; ++i) {
    int npos = pos_count[static_cast<size_t>(i)];
    if (npos == 0) continue;
    double m = -1e300;
    for (int64_t a = 0; a < B; ++a)
      if (a != i) m = std::max(m, S[static_cast<size_t>(i * B + a)]);
    double z = 0.0;
    for (int64_t a = 0; a < B; ++a)
      if (a != i) z += std::exp(S[static_cast<size_t>(i * B + a)] - m);
    double lse = m + std::log(z);
    for (int64_t a = 0; a < B; ++a) {
      if (a == i) continue;
      double soft = std::exp(S[static_cast<size_t>(i * B + a)] - m) / z;
      double coeff = soft;
      if ((*lab)[static_cast<size_t>(a)] == (*lab)[static_cast<size_t>(i)]) {
        total += (lse - S[static_cast<size_t>(i * B + a)]) / npos;
        coeff -= 1.0 / npos;
      }
      (*dS)[static_cast<size_t>(i * B + a)] = static_cast<T>(coeff);
    }
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(total);
  return make_op<T>(std::move(out), {features}, [dS, tau, B, D](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    CMatM<T> F(p.value.ptr(), B, D);
    CMatM<T> GS(dS->data(), B, B);
    MatM<T> G(g.ptr(), B, D);
    G.noalias() += (n.grad[0] / tau) * ((GS + GS.transpose()) * F);
  });
}

// Carlini–Wagner margin term, summed over the batch:
// max(max_{j!=y} z_j - z_y, -kappa).
template <class T>
Var<T> cw_margin_sum(const Var<T>& logits, std::vector<int> labels, T kappa = T(0)) {
  DIVREP_CHECK(logits->value.rank() == 2, "cw margin expects 2-D logits");
  int64_t B = logits->value.dim(0), K = logits->value.dim(1);
  auto lab = std::make_shared<std::vector<int>>(std::move(labels));
  auto best = std::make_shared<std::vector<int>>(static_cast<size_t>(B), -1);
  double acc = 0.0;
  for (int64_t r = 0; r < B; ++r) {
    int y = (*lab)[static_cast<size_t>(r)];
    int j_star = -1;
    double zmax = -1e300;
    for (int64_t c = 0; c < K; ++c) {
      if (c == y) continue;
      double v = logits->value.at2(r, c);
      if (v > zmax) {
        zmax = v;
        j_star = static_cast<int>(c);
      }
    }
    double margin = zmax - static_cast<double>(logits->value.at2(r, y));
    if (margin > -static_cast<double>(kappa)) {
      acc += margin;
      (*best)[static_cast<size_t>(r)] = j_star;
    } else {
      acc += -static_cast<double>(kappa);
    }
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(acc);
  return make_op<T>(std::move(out), {logits}, [lab, best](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    int64_t B = n.parents[0]->value.dim(0);
    for (int64_t r = 0; r < B; ++r) {
      int j = (*best)[static_cast<size_t>(r)];
      if (j < 0) continue;  // clipped at -kappa
      g.at2(r, j) += n.grad[0];
      g.at2(r, (*lab)[static_cast<size_t>(r)]) -= n.grad[0];
    }
  });
}

}  // namespace divrep::ag
