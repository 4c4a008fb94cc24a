#pragma once

#include <cstdint>

#include "gdca/rng.hpp"
#include "gdca/tensor.hpp"

namespace gdca {

template <typename T>
struct Conv2dParams {
  Tensor<T> weight;  // [out, in, kh, kw]
  Tensor<T> bias;    // [out]
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel_h() const { return weight.dim(2); }
  std::size_t kernel_w() const { return weight.dim(3); }
};

template <typename T>
struct DenseParams {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]

  std::size_t out_features() const { return weight.dim(0); }
  std::size_t in_features() const { return weight.dim(1); }
};

enum class InitScheme { HeNormal, Zeros };

// He-normal draws N(0, 2/fan_in) with fan_in = in*kh*kw for rank-4 shapes and
// the trailing dimension for rank-2 shapes.
template <typename T>
Tensor<T> init_params(const Shape& shape, InitScheme scheme, Rng& rng, bool requires_grad = true);
template <typename T>
Tensor<T> init_params(const Shape& shape, InitScheme scheme, std::uint64_t seed,
                      bool requires_grad = true);

// He-normal weights, zero bias.
template <typename T>
Conv2dParams<T> make_conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t padding, Rng& rng, bool trainable = true);
template <typename T>
DenseParams<T> make_dense(std::size_t in, std::size_t out, Rng& rng, bool trainable = true);

// Cross-correlation over [C,H,W] or [N,C,H,W] input with zero padding.
template <typename T> Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Conv2dParams<T>& p);
// Subgradient at 0 is 1.
template <typename T> Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& x, T slope);
template <typename T> Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x);
// log(sigmoid(x)) without forming sigmoid(x).
template <typename T> Tensor<T> log_sigmoid(Tape<T>& tape, const Tensor<T>& x);
// [C,H,W] -> [C]
template <typename T> Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x);
// [C*r*r,H,W] -> [C,r*H,r*W], out[c][h*r+i][w*r+j] = in[c*r*r + i*r + j][h][w]
template <typename T> Tensor<T> pixel_shuffle(Tape<T>& tape, const Tensor<T>& x, std::size_t r);
template <typename T> Tensor<T> pixel_unshuffle(Tape<T>& tape, const Tensor<T>& x, std::size_t r);
// [in] -> [out]
template <typename T> Tensor<T> dense(Tape<T>& tape, const Tensor<T>& x, const DenseParams<T>& p);

// Untracked clamp into [0,1], used only at inference time.
template <typename T> Tensor<T> clamp01(const Tensor<T>& x);

template <typename T> T sigmoid_value(T x);
template <typename T> T log_sigmoid_value(T x);

}  // namespace gdca
