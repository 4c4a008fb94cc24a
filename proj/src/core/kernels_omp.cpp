#include <cstddef>

#include "gdca/kernels.hpp"
#include "kernel_rows.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gdca::kernels::omp {

using detail::Index;

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> w,
                    std::span<const T> bias, std::span<T> out) {
  const Index n = static_cast<Index>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < n; ++o) detail::forward_channel(g, in, w, bias, out, o);
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> out_grad,
                           std::span<const T> w, std::span<T> in_grad) {
  const Index n = static_cast<Index>(g.in_channels);
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < n; ++c) detail::backward_input_channel(g, out_grad, w, in_grad, c);
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> out_grad,
                            std::span<const T> in, std::span<T> w_grad, std::span<T> bias_grad) {
  const Index n = static_cast<Index>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < n; ++o)
    detail::backward_weight_channel(g, out_grad, in, w_grad, bias_grad, o);
}

template <typename T>
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, bool trans_a,
            std::span<const T> b, bool trans_b, std::span<T> c, bool accumulate) {
  const Index rows = static_cast<Index>(m);
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (Index i = 0; i < rows; ++i)
    detail::matmul_row(i, m, k, n, a, trans_a, b, trans_b, c, accumulate);
}

#define GDCA_INSTANTIATE(T)                                                                     \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, \
                                  std::span<const T>, std::span<T>);                           \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,              \
                                         std::span<const T>, std::span<T>);                    \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,             \
                                          std::span<const T>, std::span<T>, std::span<T>);     \
  template void matmul<T>(std::size_t, std::size_t, std::size_t, std::span<const T>, bool,     \
                          std::span<const T>, bool, std::span<T>, bool);
GDCA_INSTANTIATE(float)
GDCA_INSTANTIATE(double)
#undef GDCA_INSTANTIATE

}  // namespace gdca::kernels::omp

namespace gdca::kernels {

namespace {
#ifdef _OPENMP
bool g_parallel = true;
#else
bool g_parallel = false;
#endif
}  // namespace

void set_parallel(bool on) { g_parallel = on && openmp_available(); }
bool parallel_enabled() { return g_parallel; }
bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> w,
                    std::span<const T> bias, std::span<T> out) {
  if (g_parallel)
    omp::conv2d_forward(g, in, w, bias, out);
  else
    serial::conv2d_forward(g, in, w, bias, out);
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> out_grad,
                           std::span<const T> w, std::span<T> in_grad) {
  if (g_parallel)
    omp::conv2d_backward_input(g, out_grad, w, in_grad);
  else
    serial::conv2d_backward_input(g, out_grad, w, in_grad);
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> out_grad,
                            std::span<const T> in, std::span<T> w_grad, std::span<T> bias_grad) {
  if (g_parallel)
    omp::conv2d_backward_weight(g, out_grad, in, w_grad, bias_grad);
  else
    serial::conv2d_backward_weight(g, out_grad, in, w_grad, bias_grad);
}

template <typename T>
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, bool trans_a,
            std::span<const T> b, bool trans_b, std::span<T> c, bool accumulate) {
  if (g_parallel)
    omp::matmul(m, k, n, a, trans_a, b, trans_b, c, accumulate);
  else
    serial::matmul(m, k, n, a, trans_a, b, trans_b, c, accumulate);
}

#define GDCA_INSTANTIATE(T)                                                                     \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, \
                                  std::span<const T>, std::span<T>);                           \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,              \
                                         std::span<const T>, std::span<T>);                    \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,             \
                                          std::span<const T>, std::span<T>, std::span<T>);     \
  template void matmul<T>(std::size_t, std::size_t, std::size_t, std::span<const T>, bool,     \
                          std::span<const T>, bool, std::span<T>, bool);
GDCA_INSTANTIATE(float)
GDCA_INSTANTIATE(double)
#undef GDCA_INSTANTIATE

}  // namespace gdca::kernels
