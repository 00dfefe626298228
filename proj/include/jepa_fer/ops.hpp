#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jepa_fer/tensor.hpp"

// Differentiable primitives. No implicit broadcasting: operand shapes must
// match exactly; use expand_rows / reshape to line things up.

namespace jepa_fer {

/// (m x k) . (k x n) -> (m x n).
template <typename Real>
BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

template <typename Real>
BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real>
BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real>
BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real>
BasicTensor<Real> scale(const BasicTensor<Real>& x, Real factor);
/// Exact (erf) GELU.
template <typename Real>
BasicTensor<Real> gelu(const BasicTensor<Real>& x);

/// Max-subtracted softmax along `axis`.
template <typename Real>
BasicTensor<Real> softmax(const BasicTensor<Real>& x, std::size_t axis);

/// Normalizes the last axis, then applies gain and bias (both of that
/// extent). eps must be positive.
template <typename Real>
BasicTensor<Real> layer_norm(const BasicTensor<Real>& x, const BasicTensor<Real>& gain,
                             const BasicTensor<Real>& bias, double eps = 1e-5);

/// Mean |pred - target| over the elements where mask != 0. The target never
/// receives a gradient.
template <typename Real>
BasicTensor<Real> l1_loss(const BasicTensor<Real>& pred, const BasicTensor<Real>& target,
                          std::span<const std::uint8_t> mask);
/// Same, over every element.
template <typename Real>
BasicTensor<Real> l1_loss(const BasicTensor<Real>& pred, const BasicTensor<Real>& target);

/// -log softmax(logits)[label]; logits hold K values (shape (K) or (1 x K)).
template <typename Real>
BasicTensor<Real> cross_entropy(const BasicTensor<Real>& logits, std::size_t label);

template <typename Real>
BasicTensor<Real> sum(const BasicTensor<Real>& x);
template <typename Real>
BasicTensor<Real> mean(const BasicTensor<Real>& x);

template <typename Real>
BasicTensor<Real> reshape(const BasicTensor<Real>& x, Shape shape);
template <typename Real>
BasicTensor<Real> transpose(const BasicTensor<Real>& x);

/// Columns [start, start+count) of a matrix.
template <typename Real>
BasicTensor<Real> slice_cols(const BasicTensor<Real>& x, std::size_t start, std::size_t count);
template <typename Real>
BasicTensor<Real> concat_cols(const std::vector<BasicTensor<Real>>& parts);
/// Rows of a matrix in the given order (repeats allowed).
template <typename Real>
BasicTensor<Real> gather_rows(const BasicTensor<Real>& x, std::span<const std::size_t> rows);
template <typename Real>
BasicTensor<Real> concat_rows(const std::vector<BasicTensor<Real>>& parts);
/// (1 x D) or (D) -> (n x D) by repetition.
template <typename Real>
BasicTensor<Real> expand_rows(const BasicTensor<Real>& x, std::size_t n);
/// (n x D) -> (1 x D) row average.
template <typename Real>
BasicTensor<Real> mean_rows(const BasicTensor<Real>& x);

/// x . W + b with W (in x out) and b (out); composed from the primitives
/// above.
template <typename Real>
BasicTensor<Real> affine(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias);

}  // namespace jepa_fer
