#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdca/errors.hpp"

namespace gdca {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s);

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // nonzero when produced by a recorded op
  std::size_t node = 0;
};

// Dense row-major tensor. Copies of a Tensor are handles to the same storage,
// which is what lets the tape refer back to inputs during backward.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : impl_(std::make_shared<TensorImpl<T>>()) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape)
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != data.size())
      throw ShapeError("shape " + shape_str(shape) + " does not match data length " +
                       std::to_string(data.size()));
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }
  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
  }
  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }
  static Tensor vector(std::initializer_list<T> values, bool requires_grad = false) {
    return Tensor({values.size()}, std::vector<T>(values), requires_grad);
  }

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // Writable view. Refused for tensors produced by a recorded op: their
  // backward rules may still read the stored values.
  std::span<T> mutable_data() {
    if (impl_->tape_id != 0) throw ContractError("in-place mutation of a tensor recorded on a tape");
    return impl_->data;
  }
  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }
  T operator[](std::size_t i) const { return impl_->data.at(i); }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() {
    ensure_grad();
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }
  // Const because a Tensor is a handle: the gradient slot lives in shared storage.
  void accumulate_grad(std::span<const T> g) const {
    ensure_grad();
    auto& dst = impl_->grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  }

  // Same values, new storage, no gradient tracking.
  Tensor detach() const { return Tensor(impl_->shape, impl_->data, false); }
  Tensor clone() const { return Tensor(impl_->shape, impl_->data, impl_->requires_grad); }

  std::uint64_t tape_id() const { return impl_->tape_id; }
  std::size_t node_index() const { return impl_->node; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  TensorImpl<T>& impl() { return *impl_; }

 private:
  void ensure_grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  }
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Reverse-mode record of the operations that produced a loss. A tape belongs
// to one thread; independent tapes may run concurrently.
template <typename T>
class Tape {
 public:
  // Receives the gradient of the node's output and accumulates into inputs.
  using BackwardFn = std::function<void(std::span<const T> grad_out)>;

  Tape() : id_(next_id()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool enabled() const noexcept { return enabled_; }
  void set_enabled(bool on) noexcept { enabled_ = on; }

  // True when an op over these inputs must be recorded.
  bool wants(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!enabled_) return false;
    for (const auto* t : inputs)
      if (t && t->defined() && t->requires_grad()) return true;
    return false;
  }
  bool wants(const Tensor<T>& a) const { return wants({&a}); }
  bool wants(const Tensor<T>& a, const Tensor<T>& b) const { return wants({&a, &b}); }

  // Registers `output` as the product of a differentiable op.
  void record(Tensor<T>& output, BackwardFn fn) {
    auto& impl = output.impl();
    impl.requires_grad = true;
    impl.tape_id = id_;
    impl.node = nodes_.size();
    nodes_.push_back(Node{output, std::move(fn)});
  }

  // Propagates d(loss)/d(x) into every reachable tensor with requires_grad.
  // Gradients accumulate; callers zero parameter grads between steps.
  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1)
      throw ContractError("backward() requires a scalar loss");
    if (loss.tape_id() != id_ || loss.node_index() >= nodes_.size() ||
        !nodes_[loss.node_index()].output.same_storage(loss))
      throw ContractError("backward() loss was not recorded on this tape");
    Tensor<T> seed = loss;
    const T one[1] = {T(1)};
    seed.accumulate_grad(one);
    for (std::size_t i = loss.node_index() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.output.has_grad()) continue;
      n.backward(n.output.grad());
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::uint64_t id() const noexcept { return id_; }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> output;
    BackwardFn backward;
  };

  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  std::uint64_t id_;
  bool enabled_ = true;
  std::vector<Node> nodes_;
};

template <typename T>
std::vector<T> to_vector(std::span<const T> s) {
  return std::vector<T>(s.begin(), s.end());
}

}  // namespace gdca
