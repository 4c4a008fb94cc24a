#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "gdca/tensor.hpp"

namespace gdca {

// Binary ops accept b with a's shape, a one-element b (scalar broadcast), or,
// when a is [C,H,W], a b of shape [C] applied per channel plane. The result
// always has a's shape.
template <typename T> Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(Tape<T>& tape, const Tensor<T>& a, T offset);
// max(a, floor) elementwise; gradient passes where a > floor.
template <typename T> Tensor<T> maximum(Tape<T>& tape, const Tensor<T>& a, T floor);
template <typename T> Tensor<T> neg(Tape<T>& tape, const Tensor<T>& a);
template <typename T> Tensor<T> exp(Tape<T>& tape, const Tensor<T>& a);
// Throws DomainError carrying the first non-positive index.
template <typename T> Tensor<T> log(Tape<T>& tape, const Tensor<T>& a);
// Subgradient at 0 is 0.
template <typename T> Tensor<T> abs(Tape<T>& tape, const Tensor<T>& a);
template <typename T> Tensor<T> square(Tape<T>& tape, const Tensor<T>& a);

// [m,k] x [k,n] -> [m,n]
template <typename T> Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// std::nullopt reduces everything to shape [1]; an empty axis list is a copy.
template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a,
              const std::optional<std::vector<std::size_t>>& axes = std::nullopt);
template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a,
               const std::optional<std::vector<std::size_t>>& axes = std::nullopt);

template <typename T> Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& a, Shape shape);
// Concatenates along axis 0; trailing dimensions must agree.
template <typename T> Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts);

// Central-difference gradient of a scalar function, one element at a time.
// `f` must not record on a tape that outlives the call.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x,
                           T step);

// Largest |a_i - b_i| / max(|a_i|, |b_i|, floor).
template <typename T>
double max_rel_error(std::span<const T> a, std::span<const T> b, double floor = 1e-8);

}  // namespace gdca
