#include "gdca/kernels.hpp"
#include "kernel_rows.hpp"

namespace gdca::kernels::serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> w,
                    std::span<const T> bias, std::span<T> out) {
  for (std::size_t o = 0; o < g.out_channels; ++o) detail::forward_channel(g, in, w, bias, out, o);
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> out_grad,
                           std::span<const T> w, std::span<T> in_grad) {
  for (std::size_t c = 0; c < g.in_channels; ++c)
    detail::backward_input_channel(g, out_grad, w, in_grad, c);
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> out_grad,
                            std::span<const T> in, std::span<T> w_grad, std::span<T> bias_grad) {
  for (std::size_t o = 0; o < g.out_channels; ++o)
    detail::backward_weight_channel(g, out_grad, in, w_grad, bias_grad, o);
}

template <typename T>
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, bool trans_a,
            std::span<const T> b, bool trans_b, std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
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

}  // namespace gdca::kernels::serial
