#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jepa_fer/rng.hpp"

namespace jepa_fer {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename Real>
class BasicTensor;

namespace detail {

template <typename Real>
struct TensorImpl;

/// One recorded primitive: its inputs and a closure that reads the output
/// gradient and accumulates into the inputs' gradients.
template <typename Real>
struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl<Real>>> inputs;
  std::function<void(const TensorImpl<Real>& out)> backward;
};

template <typename Real>
struct TensorImpl {
  Shape shape;
  std::vector<Real> values;
  std::vector<Real> grad;  // empty == absent
  bool requires_grad = false;
  std::shared_ptr<Node<Real>> grad_fn;

  std::vector<Real>& ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), Real(0));
    return grad;
  }
};

}  // namespace detail

/// Thread-local switch. While a guard is alive on a thread, primitives on
/// that thread record nothing and produce detached outputs.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

/// Dense row-major array with an optional reverse-mode record. Copies are
/// shallow handles onto the same storage.
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;
  using Impl = detail::TensorImpl<Real>;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape);
  static BasicTensor full(Shape shape, Real value);
  static BasicTensor from_values(Shape shape, std::vector<Real> values);
  static BasicTensor scalar(Real value);
  /// Gaussian entries N(0, stddev^2).
  static BasicTensor randn(Shape shape, Rng& rng, double stddev = 1.0);
  static BasicTensor uniform(Shape shape, Rng& rng, double lo, double hi);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const Real> values() const;
  /// In-place access for updates outside the tape (optimizer, EMA, init).
  std::span<Real> mutable_values();
  Real value(std::size_t flat_index) const;
  Real item() const;

  bool requires_grad() const;
  /// Only meaningful on leaves; clears any stale gradient when disabling.
  BasicTensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const Real> grad() const;
  void clear_grad();

  /// New leaf holding a copy of the values, with no history.
  BasicTensor detach() const;

  template <typename Other>
  BasicTensor<Other> cast() const {
    std::vector<Other> out(numel());
    const auto v = values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<Other>(v[i]);
    return BasicTensor<Other>::from_values(shape(), std::move(out));
  }

  const std::shared_ptr<Impl>& impl() const { return impl_; }
  static BasicTensor wrap(std::shared_ptr<Impl> impl);

 private:
  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Topologically ordered list of the primitives reachable from a root.
template <typename Real>
class BasicTape {
 public:
  static BasicTape record(const BasicTensor<Real>& root);

  std::size_t size() const { return order_.size(); }
  std::vector<std::string> op_names() const;
  /// Tensors feeding the recorded graph that were not produced by it
  /// (parameters, inputs, constants), each listed once.
  std::vector<const detail::TensorImpl<Real>*> leaves() const;
  /// Position of every node in the tape is after all producers of its
  /// inputs; backward walks it in reverse.
  const std::vector<std::shared_ptr<detail::TensorImpl<Real>>>& order() const { return order_; }

 private:
  std::vector<std::shared_ptr<detail::TensorImpl<Real>>> order_;  // outputs with grad_fn
};

using Tape = BasicTape<float>;

/// Reverse sweep from a scalar loss. Gradients accumulate additively into
/// every reachable tensor that requires grad; tensors that do not require
/// grad never receive one.
template <typename Real>
void backward(const BasicTensor<Real>& loss);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace jepa_fer
