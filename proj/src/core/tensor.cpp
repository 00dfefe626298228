#include "jepa_fer/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "jepa_fer/error.hpp"

namespace jepa_fer {

namespace {
thread_local bool t_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return t_grad_enabled; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::wrap(std::shared_ptr<Impl> impl) {
  BasicTensor t;
  t.impl_ = std::move(impl);
  return t;
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::from_values(Shape shape, std::vector<Real> values) {
  if (shape.empty()) shape = {1};
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  return wrap(std::move(impl));
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::zeros(Shape shape) {
  return full(std::move(shape), Real(0));
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::full(Shape shape, Real value) {
  const auto n = shape_numel(shape.empty() ? Shape{1} : shape);
  return from_values(std::move(shape), std::vector<Real>(n, value));
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::scalar(Real value) {
  return from_values({1}, {value});
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::randn(Shape shape, Rng& rng, double stddev) {
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Real>(rng.normal() * stddev);
  return from_values(std::move(shape), std::move(v));
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::uniform(Shape shape, Rng& rng, double lo, double hi) {
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Real>(rng.uniform(lo, hi));
  return from_values(std::move(shape), std::move(v));
}

template <typename Real>
const Shape& BasicTensor<Real>::shape() const {
  if (!impl_) throw UsageError("undefined tensor");
  return impl_->shape;
}

template <typename Real>
std::size_t BasicTensor<Real>::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw IndexError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

template <typename Real>
std::size_t BasicTensor<Real>::numel() const {
  return impl_ ? impl_->values.size() : 0;
}

template <typename Real>
std::span<const Real> BasicTensor<Real>::values() const {
  if (!impl_) throw UsageError("undefined tensor");
  return impl_->values;
}

template <typename Real>
std::span<Real> BasicTensor<Real>::mutable_values() {
  if (!impl_) throw UsageError("undefined tensor");
  return impl_->values;
}

template <typename Real>
Real BasicTensor<Real>::value(std::size_t flat_index) const {
  const auto v = values();
  if (flat_index >= v.size()) throw IndexError("flat index out of range");
  return v[flat_index];
}

template <typename Real>
Real BasicTensor<Real>::item() const {
  if (numel() != 1) throw DimensionError("item() needs one element, shape is " + shape_str(shape()));
  return impl_->values[0];
}

template <typename Real>
bool BasicTensor<Real>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename Real>
BasicTensor<Real>& BasicTensor<Real>::set_requires_grad(bool flag) {
  if (!impl_) throw UsageError("undefined tensor");
  if (impl_->grad_fn) throw UsageError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = flag;
  if (!flag) impl_->grad.clear();
  return *this;
}

template <typename Real>
bool BasicTensor<Real>::is_leaf() const {
  return impl_ && !impl_->grad_fn;
}

template <typename Real>
bool BasicTensor<Real>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <typename Real>
std::span<const Real> BasicTensor<Real>::grad() const {
  if (!has_grad()) throw UsageError("tensor has no gradient");
  return impl_->grad;
}

template <typename Real>
void BasicTensor<Real>::clear_grad() {
  if (impl_) impl_->grad.clear();
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::detach() const {
  return from_values(shape(), impl_->values);
}

template <typename Real>
BasicTape<Real> BasicTape<Real>::record(const BasicTensor<Real>& root) {
  using ImplPtr = std::shared_ptr<detail::TensorImpl<Real>>;
  BasicTape tape;
  if (!root.defined() || !root.impl()->grad_fn) return tape;

  // Iterative post-order DFS; inputs are pushed in reverse so the final order
  // is independent of anything but graph structure.
  std::unordered_set<const detail::TensorImpl<Real>*> visited;
  std::vector<std::pair<ImplPtr, bool>> stack;
  stack.emplace_back(root.impl(), false);
  while (!stack.empty()) {
    auto [node, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      tape.order_.push_back(node);
      continue;
    }
    if (!visited.insert(node.get()).second) continue;
    stack.emplace_back(node, true);
    const auto& inputs = node->grad_fn->inputs;
    for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) {
      if ((*it)->grad_fn && !visited.count(it->get())) stack.emplace_back(*it, false);
    }
  }
  return tape;
}

template <typename Real>
std::vector<std::string> BasicTape<Real>::op_names() const {
  std::vector<std::string> names;
  names.reserve(order_.size());
  for (const auto& t : order_) names.push_back(t->grad_fn->op);
  return names;
}

template <typename Real>
std::vector<const detail::TensorImpl<Real>*> BasicTape<Real>::leaves() const {
  std::vector<const detail::TensorImpl<Real>*> out;
  std::unordered_set<const detail::TensorImpl<Real>*> seen;
  for (const auto& t : order_) {
    for (const auto& in : t->grad_fn->inputs) {
      if (!in->grad_fn && seen.insert(in.get()).second) out.push_back(in.get());
    }
  }
  return out;
}

template <typename Real>
void backward(const BasicTensor<Real>& loss) {
  if (!loss.defined()) throw UsageError("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  auto root = loss.impl();
  if (!root->grad_fn) {
    if (!root->requires_grad) throw UsageError("backward on a detached tensor (not on the tape)");
    root->ensure_grad()[0] += Real(1);
    return;
  }
  const auto tape = BasicTape<Real>::record(loss);
  // Intermediate gradients from a previous sweep over the same graph must not
  // leak into this one; leaves keep accumulating.
  for (const auto& t : tape.order()) t->grad.clear();
  root->ensure_grad()[0] = Real(1);
  const auto& order = tape.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& out = **it;
    if (out.grad.empty()) continue;
    out.grad_fn->backward(out);
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicTape<float>;
template class BasicTape<double>;
template void backward<float>(const BasicTensor<float>&);
template void backward<double>(const BasicTensor<double>&);

}  // namespace jepa_fer
