#include "gdca/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gdca/kernels.hpp"

namespace gdca {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

namespace {

enum class Broadcast { Full, Scalar, Channel };

template <typename T>
Broadcast classify(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (b.shape() == a.shape()) return Broadcast::Full;
  if (b.numel() == 1) return Broadcast::Scalar;
  if (a.rank() == 3 && b.rank() == 1 && b.dim(0) == a.dim(0)) return Broadcast::Channel;
  throw ShapeError(std::string(op) + ": cannot combine " + shape_str(a.shape()) + " with " +
                   shape_str(b.shape()));
}

struct BIndex {
  Broadcast mode;
  std::size_t plane;
  std::size_t operator()(std::size_t i) const {
    switch (mode) {
      case Broadcast::Full: return i;
      case Broadcast::Scalar: return 0;
      case Broadcast::Channel: return i / plane;
    }
    return 0;
  }
};

// Shared driver for binary ops. `fwd(x, y)` gives the value, `da(x, y, g)`
// and `db(x, y, g)` the partial contributions for upstream gradient g.
template <typename T, typename Fwd, typename Da, typename Db>
Tensor<T> binary(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd,
                 Da da, Db db) {
  const BIndex bi{classify(a, b, name), a.rank() == 3 ? a.dim(1) * a.dim(2) : 1};
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i], y[bi(i)]);
  Tensor<T> result(a.shape(), std::move(out));
  if (tape.wants(a, b)) {
    tape.record(result, [a, b, bi, da, db](std::span<const T> g) mutable {
      const auto x = a.data();
      const auto y = b.data();
      if (a.requires_grad()) {
        std::vector<T> ga(x.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = da(x[i], y[bi(i)], g[i]);
        a.accumulate_grad(ga);
      }
      if (b.requires_grad()) {
        std::vector<T> gb(y.size(), T(0));
        for (std::size_t i = 0; i < g.size(); ++i) gb[bi(i)] += db(x[i], y[bi(i)], g[i]);
        b.accumulate_grad(gb);
      }
    });
  }
  return result;
}

// Unary ops: `fwd(x)` and `d(x, y, g)` where y = fwd(x).
template <typename T, typename Fwd, typename D>
Tensor<T> unary(Tape<T>& tape, const Tensor<T>& a, Fwd fwd, D d) {
  const auto x = a.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  Tensor<T> result(a.shape(), std::move(out));
  if (tape.wants(a)) {
    Tensor<T> keep = result;
    tape.record(result, [a, keep, d](std::span<const T> g) mutable {
      const auto x = a.data();
      const auto y = keep.data();
      std::vector<T> ga(x.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = d(x[i], y[i], g[i]);
      a.accumulate_grad(ga);
    });
  }
  return result;
}

}  // namespace

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      tape, a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T g) { return g; },
      [](T, T, T g) { return g; });
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      tape, a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T g) { return g; },
      [](T, T, T g) { return -g; });
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      tape, a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T g) { return g * y; },
      [](T x, T, T g) { return g * x; });
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  return unary(
      tape, a, [factor](T x) { return x * factor; }, [factor](T, T, T g) { return g * factor; });
}

template <typename T>
Tensor<T> add_scalar(Tape<T>& tape, const Tensor<T>& a, T offset) {
  return unary(
      tape, a, [offset](T x) { return x + offset; }, [](T, T, T g) { return g; });
}

template <typename T>
Tensor<T> maximum(Tape<T>& tape, const Tensor<T>& a, T floor) {
  return unary(
      tape, a, [floor](T x) { return x > floor ? x : floor; },
      [floor](T x, T, T g) { return x > floor ? g : T(0); });
}

template <typename T>
Tensor<T> neg(Tape<T>& tape, const Tensor<T>& a) {
  return unary(
      tape, a, [](T x) { return -x; }, [](T, T, T g) { return -g; });
}

template <typename T>
Tensor<T> exp(Tape<T>& tape, const Tensor<T>& a) {
  return unary(
      tape, a, [](T x) { return std::exp(x); }, [](T, T y, T g) { return g * y; });
}

template <typename T>
Tensor<T> log(Tape<T>& tape, const Tensor<T>& a) {
  const auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > T(0))) throw DomainError("log of non-positive value", i);
  return unary(
      tape, a, [](T v) { return std::log(v); }, [](T v, T, T g) { return g / v; });
}

template <typename T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& a) {
  return unary(
      tape, a, [](T x) { return std::abs(x); },
      [](T x, T, T g) { return x > T(0) ? g : (x < T(0) ? -g : T(0)); });
}

template <typename T>
Tensor<T> square(Tape<T>& tape, const Tensor<T>& a) {
  return unary(
      tape, a, [](T x) { return x * x; }, [](T x, T, T g) { return T(2) * x * g; });
}

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  kernels::matmul<T>(m, k, n, a.data(), false, b.data(), false, out, false);
  Tensor<T> result({m, n}, std::move(out));
  if (tape.wants(a, b)) {
    tape.record(result, [a, b, m, k, n](std::span<const T> g) mutable {
      if (a.requires_grad()) {  // dA = dC * B^T
        std::vector<T> ga(m * k);
        kernels::matmul<T>(m, n, k, g, false, b.data(), true, ga, false);
        a.accumulate_grad(ga);
      }
      if (b.requires_grad()) {  // dB = A^T * dC
        std::vector<T> gb(k * n);
        kernels::matmul<T>(k, m, n, a.data(), true, g, false, gb, false);
        b.accumulate_grad(gb);
      }
    });
  }
  return result;
}

namespace {

// Maps every input flat index to its slot in the reduced output.
struct Reduction {
  Shape out_shape;
  std::vector<std::size_t> slot;
  std::size_t count = 1;
};

Reduction plan_reduction(const Shape& shape, const std::optional<std::vector<std::size_t>>& axes) {
  const std::size_t rank = shape.size();
  std::vector<bool> reduced(rank, !axes.has_value());
  if (axes) {
    for (auto ax : *axes) {
      if (ax >= rank) throw ShapeError("reduce: axis " + std::to_string(ax) + " out of range for " +
                                       shape_str(shape));
      if (reduced[ax]) throw ShapeError("reduce: axis " + std::to_string(ax) + " repeated");
      reduced[ax] = true;
    }
  }
  Reduction r;
  for (std::size_t d = 0; d < rank; ++d) {
    if (reduced[d])
      r.count *= shape[d];
    else
      r.out_shape.push_back(shape[d]);
  }
  if (r.out_shape.empty()) r.out_shape = {1};

  const std::size_t n = shape_numel(shape);
  r.slot.resize(n);
  std::vector<std::size_t> coord(rank, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t s = 0;
    for (std::size_t d = 0; d < rank; ++d)
      if (!reduced[d]) s = s * shape[d] + coord[d];
    r.slot[i] = s;
    for (std::size_t d = rank; d-- > 0;) {
      if (++coord[d] < shape[d]) break;
      coord[d] = 0;
    }
  }
  return r;
}

template <typename T>
Tensor<T> reduce(Tape<T>& tape, const Tensor<T>& a,
                 const std::optional<std::vector<std::size_t>>& axes, bool average) {
  Reduction r = plan_reduction(a.shape(), axes);
  const auto x = a.data();
  std::vector<T> out(shape_numel(r.out_shape), T(0));
  for (std::size_t i = 0; i < x.size(); ++i) out[r.slot[i]] += x[i];
  const T count = static_cast<T>(r.count);
  if (average)
    for (auto& v : out) v /= count;
  Tensor<T> result(r.out_shape, std::move(out));
  if (tape.wants(a)) {
    tape.record(result, [a, r = std::move(r), average, count](std::span<const T> g) mutable {
      std::vector<T> ga(a.numel());
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] = average ? g[r.slot[i]] / count : g[r.slot[i]];
      a.accumulate_grad(ga);
    });
  }
  return result;
}

}  // namespace

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a,
              const std::optional<std::vector<std::size_t>>& axes) {
  return reduce(tape, a, axes, false);
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a,
               const std::optional<std::vector<std::size_t>>& axes) {
  return reduce(tape, a, axes, true);
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  Tensor<T> result(std::move(shape), to_vector(a.data()));
  if (tape.wants(a)) {
    tape.record(result, [a](std::span<const T> g) mutable { a.accumulate_grad(g); });
  }
  return result;
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t lead = 0;
  std::vector<T> out;
  bool any_grad = false;
  for (const auto& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    if (t != tail)
      throw ShapeError("concat: trailing shape " + shape_str(p.shape()) + " differs from " +
                       shape_str(parts[0].shape()));
    lead += p.dim(0);
    out.insert(out.end(), p.data().begin(), p.data().end());
    any_grad = any_grad || tape.wants(p);
  }
  Shape shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  Tensor<T> result(std::move(shape), std::move(out));
  if (any_grad) {
    tape.record(result, [parts](std::span<const T> g) mutable {
      std::size_t offset = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) p.accumulate_grad(g.subspan(offset, p.numel()));
        offset += p.numel();
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x,
                           T step) {
  Tensor<T> probe = x.detach();
  auto values = probe.mutable_data();
  std::vector<T> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T original = values[i];
    values[i] = original + step;
    const T up = f(probe);
    values[i] = original - step;
    const T down = f(probe);
    values[i] = original;
    grad[i] = (up - down) / (T(2) * step);
  }
  return Tensor<T>(x.shape(), std::move(grad));
}

template <typename T>
double max_rel_error(std::span<const T> a, std::span<const T> b, double floor) {
  if (a.size() != b.size()) throw ShapeError("max_rel_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    const double denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

#define GDCA_INSTANTIATE(T)                                                                      \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                       \
  template Tensor<T> add_scalar(Tape<T>&, const Tensor<T>&, T);                                  \
  template Tensor<T> maximum(Tape<T>&, const Tensor<T>&, T);                                     \
  template Tensor<T> neg(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> exp(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> log(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> abs(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> square(Tape<T>&, const Tensor<T>&);                                         \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&,                                             \
                         const std::optional<std::vector<std::size_t>>&);                        \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&,                                            \
                          const std::optional<std::vector<std::size_t>>&);                       \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                 \
  template Tensor<T> concat(Tape<T>&, const std::vector<Tensor<T>>&);                            \
  template Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>&,                 \
                                      const Tensor<T>&, T);                                      \
  template double max_rel_error(std::span<const T>, std::span<const T>, double);
GDCA_INSTANTIATE(float)
GDCA_INSTANTIATE(double)
#undef GDCA_INSTANTIATE

}  // namespace gdca
