#pragma once

// Per-channel bodies shared by the serial and OpenMP kernels. Each function
// owns a disjoint slice of the output, so the parallel variants only differ
// in how channels are distributed over threads.

#include <algorithm>
#include <cstddef>
#include <span>

#include "gdca/kernels.hpp"

namespace gdca::kernels::detail {

using Index = std::ptrdiff_t;

// Output positions o with 0 <= o*stride + tap - pad < extent, clipped to [0, out).
struct Range {
  Index lo, hi;
};

inline Range valid_range(Index extent, Index out, Index stride, Index tap, Index pad) {
  Index lo = 0;
  if (pad > tap) lo = (pad - tap + stride - 1) / stride;
  Index hi = (extent - 1 + pad - tap);
  hi = hi < 0 ? 0 : hi / stride + 1;
  return {lo, std::min(hi, out)};
}

template <typename T>
void forward_channel(const ConvGeometry& g, std::span<const T> in, std::span<const T> w,
                     std::span<const T> bias, std::span<T> out, std::size_t o) {
  const Index C = g.in_channels, H = g.in_h, W = g.in_w, KH = g.k_h, KW = g.k_w;
  const Index S = g.stride, P = g.padding;
  const Index OH = g.out_h(), OW = g.out_w();
  T* dst = out.data() + o * OH * OW;
  std::fill(dst, dst + OH * OW, bias.empty() ? T(0) : bias[o]);
  for (Index c = 0; c < C; ++c) {
    const T* plane = in.data() + c * H * W;
    for (Index ki = 0; ki < KH; ++ki) {
      const Range ry = valid_range(H, OH, S, ki, P);
      for (Index kj = 0; kj < KW; ++kj) {
        const T wv = w[((o * C + c) * KH + ki) * KW + kj];
        const Range rx = valid_range(W, OW, S, kj, P);
        for (Index oy = ry.lo; oy < ry.hi; ++oy) {
          const T* src = plane + (oy * S + ki - P) * W + (kj - P);
          T* row = dst + oy * OW;
          if (S == 1) {
            for (Index ox = rx.lo; ox < rx.hi; ++ox) row[ox] += wv * src[ox];
          } else {
            for (Index ox = rx.lo; ox < rx.hi; ++ox) row[ox] += wv * src[ox * S];
          }
        }
      }
    }
  }
}

template <typename T>
void backward_input_channel(const ConvGeometry& g, std::span<const T> out_grad,
                            std::span<const T> w, std::span<T> in_grad, std::size_t c) {
  const Index C = g.in_channels, H = g.in_h, W = g.in_w, KH = g.k_h, KW = g.k_w;
  const Index O = g.out_channels, S = g.stride, P = g.padding;
  const Index OH = g.out_h(), OW = g.out_w();
  T* plane = in_grad.data() + c * H * W;
  for (Index o = 0; o < O; ++o) {
    const T* go = out_grad.data() + o * OH * OW;
    for (Index ki = 0; ki < KH; ++ki) {
      const Range ry = valid_range(H, OH, S, ki, P);
      for (Index kj = 0; kj < KW; ++kj) {
        const T wv = w[((o * C + c) * KH + ki) * KW + kj];
        const Range rx = valid_range(W, OW, S, kj, P);
        for (Index oy = ry.lo; oy < ry.hi; ++oy) {
          T* dst = plane + (oy * S + ki - P) * W + (kj - P);
          const T* row = go + oy * OW;
          if (S == 1) {
            for (Index ox = rx.lo; ox < rx.hi; ++ox) dst[ox] += wv * row[ox];
          } else {
            for (Index ox = rx.lo; ox < rx.hi; ++ox) dst[ox * S] += wv * row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void backward_weight_channel(const ConvGeometry& g, std::span<const T> out_grad,
                             std::span<const T> in, std::span<T> w_grad, std::span<T> bias_grad,
                             std::size_t o) {
  const Index C = g.in_channels, H = g.in_h, W = g.in_w, KH = g.k_h, KW = g.k_w;
  const Index S = g.stride, P = g.padding;
  const Index OH = g.out_h(), OW = g.out_w();
  const T* go = out_grad.data() + o * OH * OW;
  if (!bias_grad.empty()) {
    T acc = 0;
    for (Index i = 0; i < OH * OW; ++i) acc += go[i];
    bias_grad[o] += acc;
  }
  if (w_grad.empty()) return;
  for (Index c = 0; c < C; ++c) {
    const T* plane = in.data() + c * H * W;
    for (Index ki = 0; ki < KH; ++ki) {
      const Range ry = valid_range(H, OH, S, ki, P);
      for (Index kj = 0; kj < KW; ++kj) {
        const Range rx = valid_range(W, OW, S, kj, P);
        T acc = 0;
        for (Index oy = ry.lo; oy < ry.hi; ++oy) {
          const T* src = plane + (oy * S + ki - P) * W + (kj - P);
          const T* row = go + oy * OW;
          if (S == 1) {
            for (Index ox = rx.lo; ox < rx.hi; ++ox) acc += row[ox] * src[ox];
          } else {
            for (Index ox = rx.lo; ox < rx.hi; ++ox) acc += row[ox] * src[ox * S];
          }
        }
        w_grad[((o * C + c) * KH + ki) * KW + kj] += acc;
      }
    }
  }
}

template <typename T>
void matmul_row(std::size_t i, std::size_t m, std::size_t k, std::size_t n, std::span<const T> a,
                bool trans_a, std::span<const T> b, bool trans_b, std::span<T> c,
                bool accumulate) {
  T* dst = c.data() + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    T acc = 0;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = trans_a ? a[p * m + i] : a[i * k + p];
      const T bv = trans_b ? b[j * k + p] : b[p * n + j];
      acc += av * bv;
    }
    dst[j] = accumulate ? dst[j] + acc : acc;
  }
}

}  // namespace gdca::kernels::detail
