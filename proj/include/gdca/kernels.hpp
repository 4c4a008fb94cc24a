#pragma once

#include <cstddef>
#include <span>

namespace gdca::kernels {

// Geometry of a single-image cross-correlation: input [C,H,W], weight
// [O,C,KH,KW], output [O,OH,OW]. Zero padding, equal stride on both axes.
struct ConvGeometry {
  std::size_t in_channels, in_h, in_w;
  std::size_t out_channels, k_h, k_w;
  std::size_t stride, padding;

  std::size_t out_h() const { return (in_h + 2 * padding - k_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * padding - k_w) / stride + 1; }
};

// Every kernel accumulates each output element in the same fixed order in
// both variants, so serial and OpenMP results are bitwise identical for any
// thread count.
namespace serial {
template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> w,
                    std::span<const T> bias, std::span<T> out);
// in_grad += W^T * out_grad
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> out_grad,
                           std::span<const T> w, std::span<T> in_grad);
// w_grad += out_grad (x) in ; bias_grad += sum(out_grad)
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> out_grad,
                            std::span<const T> in, std::span<T> w_grad, std::span<T> bias_grad);
// c = a[m,k] * b[k,n]; trans flags read the stored operand transposed.
template <typename T>
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, bool trans_a,
            std::span<const T> b, bool trans_b, std::span<T> c, bool accumulate);
}  // namespace serial

namespace omp {
template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> w,
                    std::span<const T> bias, std::span<T> out);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> out_grad,
                           std::span<const T> w, std::span<T> in_grad);
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> out_grad,
                            std::span<const T> in, std::span<T> w_grad, std::span<T> bias_grad);
template <typename T>
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, bool trans_a,
            std::span<const T> b, bool trans_b, std::span<T> c, bool accumulate);
}  // namespace omp

// Process-wide switch used by the dispatching entry points below. Defaults to
// the OpenMP variants when the library was built with OpenMP.
void set_parallel(bool on);
bool parallel_enabled();
bool openmp_available();

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> w,
                    std::span<const T> bias, std::span<T> out);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> out_grad,
                           std::span<const T> w, std::span<T> in_grad);
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> out_grad,
                            std::span<const T> in, std::span<T> w_grad, std::span<T> bias_grad);
template <typename T>
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, bool trans_a,
            std::span<const T> b, bool trans_b, std::span<T> c, bool accumulate);

}  // namespace gdca::kernels
