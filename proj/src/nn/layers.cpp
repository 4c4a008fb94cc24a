#include "gdca/layers.hpp"

#include <algorithm>
#include <cmath>

#include "gdca/kernels.hpp"

namespace gdca {

template <typename T>
T sigmoid_value(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T log_sigmoid_value(T x) {
  return std::min(x, T(0)) - std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
Tensor<T> init_params(const Shape& shape, InitScheme scheme, Rng& rng, bool requires_grad) {
  auto t = Tensor<T>::zeros(shape, requires_grad);
  if (scheme == InitScheme::Zeros) return t;
  std::size_t fan_in = shape.back();
  if (shape.size() == 4) fan_in = shape[1] * shape[2] * shape[3];
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.mutable_data()) v = static_cast<T>(rng.normal() * sd);
  return t;
}

template <typename T>
Tensor<T> init_params(const Shape& shape, InitScheme scheme, std::uint64_t seed,
                      bool requires_grad) {
  Rng rng(seed);
  return init_params<T>(shape, scheme, rng, requires_grad);
}

template <typename T>
Conv2dParams<T> make_conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t padding, Rng& rng, bool trainable) {
  Conv2dParams<T> p;
  p.weight = init_params<T>({out, in, kernel, kernel}, InitScheme::HeNormal, rng, trainable);
  p.bias = init_params<T>({out}, InitScheme::Zeros, rng, trainable);
  p.stride = stride;
  p.padding = padding;
  return p;
}

template <typename T>
DenseParams<T> make_dense(std::size_t in, std::size_t out, Rng& rng, bool trainable) {
  DenseParams<T> p;
  p.weight = init_params<T>({out, in}, InitScheme::HeNormal, rng, trainable);
  p.bias = init_params<T>({out}, InitScheme::Zeros, rng, trainable);
  return p;
}

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Conv2dParams<T>& p) {
  if (p.weight.rank() != 4) throw ShapeError("conv2d: weight must be rank 4");
  if (p.bias.numel() != p.out_channels())
    throw ShapeError("conv2d: bias length does not match output channels");
  if (p.stride == 0) throw ShapeError("conv2d: stride must be positive");
  const bool batched = x.rank() == 4;
  if (x.rank() != 3 && !batched)
    throw ShapeError("conv2d: expected [C,H,W] or [N,C,H,W], got " + shape_str(x.shape()));
  const std::size_t off = batched ? 1 : 0;
  const std::size_t batch = batched ? x.dim(0) : 1;
  kernels::ConvGeometry g{x.dim(off),       x.dim(off + 1), x.dim(off + 2), p.out_channels(),
                          p.kernel_h(),     p.kernel_w(),   p.stride,       p.padding};
  if (g.in_channels != p.in_channels())
    throw ShapeError("conv2d: input has " + std::to_string(g.in_channels) +
                     " channels, weight expects " + std::to_string(p.in_channels()));
  if (g.in_h + 2 * g.padding < g.k_h || g.in_w + 2 * g.padding < g.k_w)
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel");

  const std::size_t in_size = g.in_channels * g.in_h * g.in_w;
  const std::size_t out_size = g.out_channels * g.out_h() * g.out_w();
  std::vector<T> out(batch * out_size);
  for (std::size_t n = 0; n < batch; ++n)
    kernels::conv2d_forward<T>(g, x.data().subspan(n * in_size, in_size), p.weight.data(),
                               p.bias.data(), std::span<T>(out).subspan(n * out_size, out_size));
  Shape shape = batched ? Shape{batch, g.out_channels, g.out_h(), g.out_w()}
                        : Shape{g.out_channels, g.out_h(), g.out_w()};
  Tensor<T> result(std::move(shape), std::move(out));

  if (tape.wants({&x, &p.weight, &p.bias})) {
    tape.record(result, [x, w = p.weight, b = p.bias, g, batch, in_size,
                         out_size](std::span<const T> grad) mutable {
      if (x.requires_grad()) {
        std::vector<T> gx(x.numel(), T(0));
        for (std::size_t n = 0; n < batch; ++n)
          kernels::conv2d_backward_input<T>(g, grad.subspan(n * out_size, out_size), w.data(),
                                            std::span<T>(gx).subspan(n * in_size, in_size));
        x.accumulate_grad(gx);
      }
      const bool need_w = w.requires_grad(), need_b = b.requires_grad();
      if (need_w || need_b) {
        std::vector<T> gw(need_w ? w.numel() : 0, T(0));
        std::vector<T> gb(need_b ? b.numel() : 0, T(0));
        for (std::size_t n = 0; n < batch; ++n)
          kernels::conv2d_backward_weight<T>(g, grad.subspan(n * out_size, out_size),
                                             x.data().subspan(n * in_size, in_size), gw, gb);
        if (need_w) w.accumulate_grad(gw);
        if (need_b) b.accumulate_grad(gb);
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& x, T slope) {
  const auto v = x.data();
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] >= T(0) ? v[i] : slope * v[i];
  Tensor<T> result(x.shape(), std::move(out));
  if (tape.wants(x)) {
    tape.record(result, [x, slope](std::span<const T> g) mutable {
      const auto v = x.data();
      std::vector<T> gx(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) gx[i] = v[i] >= T(0) ? g[i] : slope * g[i];
      x.accumulate_grad(gx);
    });
  }
  return result;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  const auto v = x.data();
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid_value(v[i]);
  Tensor<T> result(x.shape(), std::move(out));
  if (tape.wants(x)) {
    Tensor<T> s = result;
    tape.record(result, [x, s](std::span<const T> g) mutable {
      const auto sv = s.data();
      std::vector<T> gx(sv.size());
      for (std::size_t i = 0; i < sv.size(); ++i) gx[i] = g[i] * sv[i] * (T(1) - sv[i]);
      x.accumulate_grad(gx);
    });
  }
  return result;
}

template <typename T>
Tensor<T> log_sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  const auto v = x.data();
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = log_sigmoid_value(v[i]);
  Tensor<T> result(x.shape(), std::move(out));
  if (tape.wants(x)) {
    tape.record(result, [x](std::span<const T> g) mutable {
      const auto v = x.data();
      std::vector<T> gx(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) gx[i] = g[i] * sigmoid_value(-v[i]);
      x.accumulate_grad(gx);
    });
  }
  return result;
}

template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x) {
  if (x.rank() != 3) throw ShapeError("global_avg_pool: expected [C,H,W], got " + shape_str(x.shape()));
  const std::size_t C = x.dim(0), plane = x.dim(1) * x.dim(2);
  const auto v = x.data();
  std::vector<T> out(C);
  for (std::size_t c = 0; c < C; ++c) {
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += v[c * plane + i];
    out[c] = acc / static_cast<T>(plane);
  }
  Tensor<T> result({C}, std::move(out));
  if (tape.wants(x)) {
    tape.record(result, [x, C, plane](std::span<const T> g) mutable {
      std::vector<T> gx(C * plane);
      for (std::size_t c = 0; c < C; ++c) {
        const T share = g[c] / static_cast<T>(plane);
        std::fill(gx.begin() + c * plane, gx.begin() + (c + 1) * plane, share);
      }
      x.accumulate_grad(gx);
    });
  }
  return result;
}

namespace {

// Flat index pairs (shuffled position <- source position) for a pixel shuffle.
std::vector<std::size_t> shuffle_map(std::size_t C, std::size_t H, std::size_t W, std::size_t r) {
  std::vector<std::size_t> src(C * H * W * r * r);
  const std::size_t OH = H * r, OW = W * r;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const std::size_t in_c = c * r * r + i * r + j;
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w)
            src[(c * OH + h * r + i) * OW + w * r + j] = (in_c * H + h) * W + w;
      }
  return src;
}

// out[k] = in[map[k]] when gather, out[map[k]] = in[k] otherwise.
template <typename T>
Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, Shape shape,
                  std::shared_ptr<const std::vector<std::size_t>> map, bool gather) {
  const auto v = x.data();
  std::vector<T> out(v.size());
  const auto& m = *map;
  if (gather)
    for (std::size_t k = 0; k < m.size(); ++k) out[k] = v[m[k]];
  else
    for (std::size_t k = 0; k < m.size(); ++k) out[m[k]] = v[k];
  Tensor<T> result(std::move(shape), std::move(out));
  if (tape.wants(x)) {
    tape.record(result, [x, map, gather](std::span<const T> g) mutable {
      const auto& m = *map;
      std::vector<T> gx(g.size());
      if (gather)
        for (std::size_t k = 0; k < m.size(); ++k) gx[m[k]] = g[k];
      else
        for (std::size_t k = 0; k < m.size(); ++k) gx[k] = g[m[k]];
      x.accumulate_grad(gx);
    });
  }
  return result;
}

}  // namespace

template <typename T>
Tensor<T> pixel_shuffle(Tape<T>& tape, const Tensor<T>& x, std::size_t r) {
  if (x.rank() != 3 || r == 0 || x.dim(0) % (r * r) != 0)
    throw ShapeError("pixel_shuffle: channels of " + shape_str(x.shape()) +
                     " not divisible by r^2 = " + std::to_string(r * r));
  const std::size_t C = x.dim(0) / (r * r), H = x.dim(1), W = x.dim(2);
  auto map = std::make_shared<const std::vector<std::size_t>>(shuffle_map(C, H, W, r));
  return permute(tape, x, {C, H * r, W * r}, map, true);
}

template <typename T>
Tensor<T> pixel_unshuffle(Tape<T>& tape, const Tensor<T>& x, std::size_t r) {
  if (x.rank() != 3 || r == 0 || x.dim(1) % r != 0 || x.dim(2) % r != 0)
    throw ShapeError("pixel_unshuffle: spatial dims of " + shape_str(x.shape()) +
                     " not divisible by " + std::to_string(r));
  const std::size_t C = x.dim(0), H = x.dim(1) / r, W = x.dim(2) / r;
  auto map = std::make_shared<const std::vector<std::size_t>>(shuffle_map(C, H, W, r));
  return permute(tape, x, {C * r * r, H, W}, map, false);
}

template <typename T>
Tensor<T> dense(Tape<T>& tape, const Tensor<T>& x, const DenseParams<T>& p) {
  if (x.rank() != 1 || p.weight.rank() != 2 || x.dim(0) != p.in_features() ||
      p.bias.numel() != p.out_features())
    throw ShapeError("dense: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(p.weight.shape()));
  const std::size_t in = p.in_features(), out_n = p.out_features();
  std::vector<T> out(out_n);
  kernels::matmul<T>(out_n, in, 1, p.weight.data(), false, x.data(), false, out, false);
  const auto b = p.bias.data();
  for (std::size_t i = 0; i < out_n; ++i) out[i] += b[i];
  Tensor<T> result({out_n}, std::move(out));
  if (tape.wants({&x, &p.weight, &p.bias})) {
    tape.record(result, [x, w = p.weight, b = p.bias, in, out_n](std::span<const T> g) mutable {
      if (x.requires_grad()) {
        std::vector<T> gx(in);
        kernels::matmul<T>(in, out_n, 1, w.data(), true, g, false, gx, false);
        x.accumulate_grad(gx);
      }
      if (w.requires_grad()) {
        std::vector<T> gw(out_n * in);
        kernels::matmul<T>(out_n, 1, in, g, false, x.data(), false, gw, false);
        w.accumulate_grad(gw);
      }
      if (b.requires_grad()) b.accumulate_grad(g);
    });
  }
  return result;
}

template <typename T>
Tensor<T> clamp01(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = std::clamp(v, T(0), T(1));
  return Tensor<T>(x.shape(), std::move(out));
}

#define GDCA_INSTANTIATE(T)                                                                      \
  template T sigmoid_value(T);                                                                   \
  template T log_sigmoid_value(T);                                                               \
  template Tensor<T> init_params<T>(const Shape&, InitScheme, Rng&, bool);                       \
  template Tensor<T> init_params<T>(const Shape&, InitScheme, std::uint64_t, bool);              \
  template Conv2dParams<T> make_conv<T>(std::size_t, std::size_t, std::size_t, std::size_t,     \
                                        std::size_t, Rng&, bool);                                \
  template DenseParams<T> make_dense<T>(std::size_t, std::size_t, Rng&, bool);                   \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Conv2dParams<T>&);                 \
  template Tensor<T> leaky_relu(Tape<T>&, const Tensor<T>&, T);                                  \
  template Tensor<T> sigmoid(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T> log_sigmoid(Tape<T>&, const Tensor<T>&);                                    \
  template Tensor<T> global_avg_pool(Tape<T>&, const Tensor<T>&);                                \
  template Tensor<T> pixel_shuffle(Tape<T>&, const Tensor<T>&, std::size_t);                     \
  template Tensor<T> pixel_unshuffle(Tape<T>&, const Tensor<T>&, std::size_t);                   \
  template Tensor<T> dense(Tape<T>&, const Tensor<T>&, const DenseParams<T>&);                   \
  template Tensor<T> clamp01(const Tensor<T>&);
GDCA_INSTANTIATE(float)
GDCA_INSTANTIATE(double)
#undef GDCA_INSTANTIATE

}  // namespace gdca
