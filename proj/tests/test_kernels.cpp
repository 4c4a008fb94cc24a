#include <vector>

#include "doctest.h"
#include "gdca/kernels.hpp"
#include "gdca/rng.hpp"
#include "oracles.hpp"

using namespace gdca;
using kernels::ConvGeometry;
using testing::naive_conv;

namespace {

template <typename T>
std::vector<T> random_values(Rng& rng, std::size_t n) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform01() * 2.0 - 1.0);
  return v;
}

ConvGeometry random_geometry(Rng& rng) {
  const std::size_t k = 1 + 2 * rng.uniform_int(3);
  ConvGeometry g{1 + rng.uniform_int(4), k + rng.uniform_int(7), k + rng.uniform_int(7),
                 1 + rng.uniform_int(5), k, k, 1 + rng.uniform_int(2), rng.uniform_int(3)};
  return g;
}

template <typename T>
void compare_variants(std::uint64_t seed) {
  Rng rng(seed);
  for (int trial = 0; trial < 40; ++trial) {
    const ConvGeometry g = random_geometry(rng);
    const auto in = random_values<T>(rng, g.in_channels * g.in_h * g.in_w);
    const auto w = random_values<T>(rng, g.out_channels * g.in_channels * g.k_h * g.k_w);
    const auto b = random_values<T>(rng, g.out_channels);
    const std::size_t out_n = g.out_channels * g.out_h() * g.out_w();
    const auto go = random_values<T>(rng, out_n);

    std::vector<T> out_s(out_n), out_p(out_n);
    kernels::serial::conv2d_forward<T>(g, in, w, b, out_s);
    kernels::omp::conv2d_forward<T>(g, in, w, b, out_p);
    CHECK(out_s == out_p);
    CHECK(out_s == naive_conv(g, in, w, b));

    std::vector<T> gi_s(in.size()), gi_p(in.size());
    kernels::serial::conv2d_backward_input<T>(g, go, w, gi_s);
    kernels::omp::conv2d_backward_input<T>(g, go, w, gi_p);
    CHECK(gi_s == gi_p);

    std::vector<T> gw_s(w.size()), gw_p(w.size()), gb_s(b.size()), gb_p(b.size());
    kernels::serial::conv2d_backward_weight<T>(g, go, in, gw_s, gb_s);
    kernels::omp::conv2d_backward_weight<T>(g, go, in, gw_p, gb_p);
    CHECK(gw_s == gw_p);
    CHECK(gb_s == gb_p);

    const std::size_t m = 1 + rng.uniform_int(9), k = 1 + rng.uniform_int(9),
                      n = 1 + rng.uniform_int(9);
    const auto a = random_values<T>(rng, m * k);
    const auto bm = random_values<T>(rng, k * n);
    std::vector<T> c_s(m * n), c_p(m * n);
    kernels::serial::matmul<T>(m, k, n, a, false, bm, false, c_s, false);
    kernels::omp::matmul<T>(m, k, n, a, false, bm, false, c_p, false);
    CHECK(c_s == c_p);
  }
}

}  // namespace

TEST_CASE("OpenMP kernels are bitwise identical to the serial reference (double)") {
  compare_variants<double>(101);
}

TEST_CASE("OpenMP kernels are bitwise identical to the serial reference (float)") {
  compare_variants<float>(202);
}

TEST_CASE("transposed matmul operands") {
  // a = [[1,2,3],[4,5,6]] stored transposed as [3,2]
  const std::vector<double> at = {1, 4, 2, 5, 3, 6};
  const std::vector<double> b = {1, 0, 0, 1, 1, 1};  // [3,2]
  std::vector<double> c(4);
  kernels::serial::matmul<double>(2, 3, 2, at, true, b, false, c, false);
  CHECK(c == std::vector<double>{4, 5, 10, 11});
  const std::vector<double> bt = {1, 0, 1, 0, 1, 1};  // b stored as [2,3]
  const std::vector<double> a = {1, 2, 3, 4, 5, 6};
  kernels::serial::matmul<double>(2, 3, 2, a, false, bt, true, c, true);
  CHECK(c == std::vector<double>{8, 10, 20, 22});
}

TEST_CASE("parallel switch") {
  const bool before = kernels::parallel_enabled();
  kernels::set_parallel(false);
  CHECK_FALSE(kernels::parallel_enabled());
  kernels::set_parallel(true);
  CHECK(kernels::parallel_enabled() == kernels::openmp_available());
  kernels::set_parallel(before);
}
