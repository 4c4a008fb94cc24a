// Serial vs OpenMP kernel timings on layer shapes that occur in training.

#include <benchmark/benchmark.h>

#include <vector>

#include "gdca/kernels.hpp"
#include "gdca/rng.hpp"

namespace {

using gdca::kernels::ConvGeometry;

struct Buffers {
  std::vector<float> in, w, b, out;
  explicit Buffers(const ConvGeometry& g) {
    gdca::Rng rng(1);
    auto fill = [&](std::vector<float>& v, std::size_t n) {
      v.resize(n);
      for (auto& x : v) x = static_cast<float>(rng.uniform01() - 0.5);
    };
    fill(in, g.in_channels * g.in_h * g.in_w);
    fill(w, g.out_channels * g.in_channels * g.k_h * g.k_w);
    fill(b, g.out_channels);
    fill(out, g.out_channels * g.out_h() * g.out_w());
  }
};

// Shape index: 0 generator body (C=8, 24x24), 1 upsample (8->32, 48x48),
// 2 default body (C=64, 24x24), 3 extractor stage (32->64, 48x48, stride 2).
ConvGeometry shape(int i) {
  switch (i) {
    case 0: return {8, 24, 24, 8, 3, 3, 1, 1};
    case 1: return {8, 48, 48, 32, 3, 3, 1, 1};
    case 2: return {64, 24, 24, 64, 3, 3, 1, 1};
    default: return {32, 48, 48, 64, 3, 3, 2, 1};
  }
}

double macs(const ConvGeometry& g) {
  return static_cast<double>(g.out_channels * g.out_h() * g.out_w() * g.in_channels * g.k_h *
                             g.k_w);
}

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  const auto g = shape(static_cast<int>(state.range(0)));
  Buffers buf(g);
  for (auto _ : state) {
    if constexpr (Parallel)
      gdca::kernels::omp::conv2d_forward<float>(g, buf.in, buf.w, buf.b, buf.out);
    else
      gdca::kernels::serial::conv2d_forward<float>(g, buf.in, buf.w, buf.b, buf.out);
    benchmark::DoNotOptimize(buf.out.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(macs(g), benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Parallel>
void BM_BackwardInput(benchmark::State& state) {
  const auto g = shape(static_cast<int>(state.range(0)));
  Buffers buf(g);
  std::vector<float> in_grad(buf.in.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      gdca::kernels::omp::conv2d_backward_input<float>(g, buf.out, buf.w, in_grad);
    else
      gdca::kernels::serial::conv2d_backward_input<float>(g, buf.out, buf.w, in_grad);
    benchmark::DoNotOptimize(in_grad.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(macs(g), benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Parallel>
void BM_BackwardWeight(benchmark::State& state) {
  const auto g = shape(static_cast<int>(state.range(0)));
  Buffers buf(g);
  std::vector<float> w_grad(buf.w.size()), b_grad(buf.b.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      gdca::kernels::omp::conv2d_backward_weight<float>(g, buf.out, buf.in, w_grad, b_grad);
    else
      gdca::kernels::serial::conv2d_backward_weight<float>(g, buf.out, buf.in, w_grad, b_grad);
    benchmark::DoNotOptimize(w_grad.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(macs(g), benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<float> a(n * n, 0.5f), b(n * n, 0.25f), c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      gdca::kernels::omp::matmul<float>(n, n, n, a, false, b, false, c, false);
    else
      gdca::kernels::serial::matmul<float>(n, n, n, a, false, b, false, c, false);
    benchmark::DoNotOptimize(c.data());
  }
}

}  // namespace

BENCHMARK(BM_Forward<false>)->DenseRange(0, 3);
BENCHMARK(BM_Forward<true>)->DenseRange(0, 3);
BENCHMARK(BM_BackwardInput<false>)->DenseRange(0, 3);
BENCHMARK(BM_BackwardInput<true>)->DenseRange(0, 3);
BENCHMARK(BM_BackwardWeight<false>)->DenseRange(0, 3);
BENCHMARK(BM_BackwardWeight<true>)->DenseRange(0, 3);
BENCHMARK(BM_Matmul<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
