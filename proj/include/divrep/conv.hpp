#pragma once

#include <thread>

#include "divrep/ops.hpp"

namespace divrep::ag {

namespace detail {

template <class T>
void im2col(const T* img, int64_t Ci, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t Ho, int64_t Wo, T* cols) {
  // cols is [Ci*kh*kw, Ho*Wo]
  for (int64_t c = 0; c < Ci; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        T* dst = cols + ((c * kh + i) * kw + j) * (Ho * Wo);
        for (int64_t y = 0; y < Ho; ++y) {
          int64_t sy = y * stride + i - pad;
          if (sy < 0 || sy >= H) {
            for (int64_t x = 0; x < Wo; ++x) dst[y * Wo + x] = T(0);
            continue;
          }
          const T* src = img + (c * H + sy) * W;
          for (int64_t x = 0; x < Wo; ++x) {
            int64_t sx = x * stride + j - pad;
            dst[y * Wo + x] = (sx >= 0 && sx < W) ? src[sx] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, int64_t Ci, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, T* img) {
  for (int64_t c = 0; c < Ci; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        const T* src = cols + ((c * kh + i) * kw + j) * (Ho * Wo);
        for (int64_t y = 0; y < Ho; ++y) {
          int64_t sy = y * stride + i - pad;
          if (sy < 0 || sy >= H) continue;
          T* dst = img + (c * H + sy) * W;
          for (int64_t x = 0; x < Wo; ++x) {
            int64_t sx = x * stride + j - pad;
            if (sx >= 0 && sx < W) dst[sx] += src[y * Wo + x];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int64_t stride, int64_t pad) {
  DIVREP_CHECK(x->value.rank() == 4 && w->value.rank() == 4, "conv2d expects 4-D x and w");
  int64_t B = x->value.dim(0), Ci = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
  int64_t Co = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
  DIVREP_CHECK(w->value.dim(1) == Ci, "conv2d channel mismatch");
  DIVREP_CHECK(bias->value.rank() == 1 && bias->value.dim(0) == Co, "conv2d bias shape");
  int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  DIVREP_CHECK(Ho >= 1 && Wo >= 1, "conv2d output collapsed");
  int64_t K = Ci * kh * kw, N = Ho * Wo;

  Tensor<T> out({B, Co, Ho, Wo});
  parallel_for(B, [&](int64_t lo, int64_t hi) {
    aligned_vector<T> cols(static_cast<size_t>(K * N));
    CMatM<T> Wm(w->value.ptr(), Co, K);
    for (int64_t b = lo; b < hi; ++b) {
      detail::im2col(x->value.ptr() + b * Ci * H * W, Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                     cols.data());
      CMatM<T> C(cols.data(), K, N);
      MatM<T> O(out.ptr() + b * Co * N, Co, N);
      O.noalias() = Wm * C;
      for (int64_t c = 0; c < Co; ++c) O.row(c).array() += bias->value[c];
    }
  });

  auto bwd = [B, Ci, H, W, Co, kh, kw, stride, pad, Ho, Wo, K, N](Node<T>& n) {
    auto &px = *n.parents[0], &pw = *n.parents[1], &pb = *n.parents[2];
    const bool need_dx = px.requires_grad;
    const bool need_dw = pw.requires_grad, need_db = pb.requires_grad;
    if (need_dx) px.ensure_grad();
    if (need_dw) pw.ensure_grad();
    if (need_db) pb.ensure_grad();

    int workers = std::min<int64_t>(worker_count(), B);
    if (workers < 1) workers = 1;
    int64_t chunk = (B + workers - 1) / workers;
    std::vector<aligned_vector<T>> dw_part(static_cast<size_t>(workers)),
        db_part(static_cast<size_t>(workers));
    auto work = [&](int widx, int64_t lo, int64_t hi) {
      auto& dwp = dw_part[static_cast<size_t>(widx)];
      auto& dbp = db_part[static_cast<size_t>(widx)];
      if (need_dw) dwp.assign(static_cast<size_t>(Co * K), T(0));
      if (need_db) dbp.assign(static_cast<size_t>(Co), T(0));
      aligned_vector<T> cols(static_cast<size_t>(K * N));
      aligned_vector<T> dcols(need_dx ? static_cast<size_t>(K * N) : 0);
      CMatM<T> Wm(pw.value.ptr(), Co, K);
      for (int64_t b = lo; b < hi; ++b) {
        CMatM<T> G(n.grad.ptr() + b * Co * N, Co, N);
        if (need_dw) {
          detail::im2col(px.value.ptr() + b * Ci * H * W, Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                         cols.data());
          CMatM<T> C(cols.data(), K, N);
          MatM<T> dW(dwp.data(), Co, K);
          dW.noalias() += G * C.transpose();
        }
        if (need_db) {
          for (int64_t c = 0; c < Co; ++c) dbp[static_cast<size_t>(c)] += G.row(c).sum();
        }
        if (need_dx) {
          MatM<T> dC(dcols.data(), K, N);
          dC.noalias() = Wm.transpose() * G;
          detail::col2im_add(dcols.data(), Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                             px.grad.ptr() + b * Ci * H * W);
        }
      }
    };
    if (workers == 1) {
      work(0, 0, B);
    } else {
      std::vector<std::thread> pool;
      for (int widx = 1; widx < workers; ++widx) {
        int64_t lo = widx * chunk, hi = std::min<int64_t>(B, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(work, widx, lo, hi);
      }
      work(0, 0, std::min<int64_t>(B, chunk));
      for (auto& t : pool) t.join();
    }
    // merge partials in worker order
    if (need_dw) {
      auto& dW = pw.grad;
      for (int widx = 0; widx < workers; ++widx) {
        if (dw_part[static_cast<size_t>(widx)].empty()) continue;
        for (int64_t i = 0; i < dW.numel(); ++i)
          dW[i] += dw_part[static_cast<size_t>(widx)][static_cast<size_t>(i)];
      }
    }
    if (need_db) {
      auto& dB = pb.grad;
      for (int widx = 0; widx < workers; ++widx) {
        if (db_part[static_cast<size_t>(widx)].empty()) continue;
        for (int64_t i = 0; i < dB.numel(); ++i)
          dB[i] += db_part[static_cast<size_t>(widx)][static_cast<size_t>(i)];
      }
    }
  };
  return make_op<T>(std::move(out), {x, w, bias}, std::move(bwd));
}

// Nearest-neighbour resize to an arbitrary target size.
template <class T>
Var<T> nearest_resize(const Var<T>& x, int64_t Ho, int64_t Wo) {
  DIVREP_CHECK(x->value.rank() == 4, "nearest_resize expects 4-D");
  int64_t B = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
  DIVREP_CHECK(Ho >= 1 && Wo >= 1, "nearest_resize target size");
  Tensor<T> out({B, C, Ho, Wo});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t y = 0; y < Ho; ++y) {
        int64_t sy = y * H / Ho;
        for (int64_t x2 = 0; x2 < Wo; ++x2) out.at4(b, c, y, x2) = x->value.at4(b, c, sy, x2 * W / Wo);
      }
  return make_op<T>(std::move(out), {x}, [H, W, Ho, Wo](Node<T>& n) {
    auto& g = n.parents[0]->ensure_grad();
    int64_t B = n.value.dim(0), C = n.value.dim(1);
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < Ho; ++y) {
          int64_t sy = y * H / Ho;
          for (int64_t x2 = 0; x2 < Wo; ++x2) g.at4(b, c, sy, x2 * W / Wo) += n.grad.at4(b, c, y, x2);
        }
  });
}

}  // namespace divrep::ag
