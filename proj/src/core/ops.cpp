#include "jepa_fer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gemm.hpp"
#include "jepa_fer/error.hpp"

namespace jepa_fer {

namespace {

template <typename Real>
using ImplPtr = std::shared_ptr<detail::TensorImpl<Real>>;

template <typename Real>
bool tracks(const BasicTensor<Real>& t) {
  return t.requires_grad();
}

/// Wraps forward values into a tensor, attaching a node when any input is on
/// the tape and recording is enabled on this thread.
template <typename Real, typename Backward>
BasicTensor<Real> make_result(Shape shape, std::vector<Real> values, const char* op,
                              std::vector<ImplPtr<Real>> inputs, Backward&& backward_fn) {
  auto out = BasicTensor<Real>::from_values(std::move(shape), std::move(values));
  if (!NoGradGuard::grad_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const ImplPtr<Real>& p) { return p->requires_grad; });
  if (!any) return out;
  auto node = std::make_shared<detail::Node<Real>>();
  node->op = op;
  node->inputs = std::move(inputs);
  node->backward = std::forward<Backward>(backward_fn);
  out.impl()->grad_fn = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

/// Gradient buffer of an input, or nullptr when it takes no gradient.
template <typename Real>
Real* grad_sink(const ImplPtr<Real>& p) {
  return p->requires_grad ? p->ensure_grad().data() : nullptr;
}

template <typename Real>
void require_same_shape(const BasicTensor<Real>& a, const BasicTensor<Real>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename Real>
void require_matrix(const BasicTensor<Real>& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(x.shape()));
  }
}

}  // namespace

template <typename Real>
BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<Real> out(m * n);
  kernel::gemm(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<Real>({m, n}, std::move(out), "matmul", {ai, bi},
                           [ai, bi, m, k, n](const detail::TensorImpl<Real>& o) {
                             const Real* g = o.grad.data();
                             if (Real* ga = grad_sink(ai)) {
                               // dA = G . B^T
                               std::vector<Real> bt(n * k), tmp(m * k);
                               kernel::transpose(bi->values.data(), bt.data(), k, n);
                               kernel::gemm(g, bt.data(), tmp.data(), m, n, k);
                               for (std::size_t i = 0; i < m * k; ++i) ga[i] += tmp[i];
                             }
                             if (Real* gb = grad_sink(bi)) {
                               // dB = A^T . G
                               std::vector<Real> at(k * m), tmp(k * n);
                               kernel::transpose(ai->values.data(), at.data(), m, k);
                               kernel::gemm(at.data(), g, tmp.data(), k, m, n);
                               for (std::size_t i = 0; i < k * n; ++i) gb[i] += tmp[i];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape(a, b, "add");
  const auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<Real>(a.shape(), std::move(out), "add", {ai, bi},
                           [ai, bi](const detail::TensorImpl<Real>& o) {
                             const auto n = o.grad.size();
                             if (Real* ga = grad_sink(ai)) {
                               for (std::size_t i = 0; i < n; ++i) ga[i] += o.grad[i];
                             }
                             if (Real* gb = grad_sink(bi)) {
                               for (std::size_t i = 0; i < n; ++i) gb[i] += o.grad[i];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape(a, b, "sub");
  const auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<Real>(a.shape(), std::move(out), "sub", {ai, bi},
                           [ai, bi](const detail::TensorImpl<Real>& o) {
                             const auto n = o.grad.size();
                             if (Real* ga = grad_sink(ai)) {
                               for (std::size_t i = 0; i < n; ++i) ga[i] += o.grad[i];
                             }
                             if (Real* gb = grad_sink(bi)) {
                               for (std::size_t i = 0; i < n; ++i) gb[i] -= o.grad[i];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<Real>(a.shape(), std::move(out), "mul", {ai, bi},
                           [ai, bi](const detail::TensorImpl<Real>& o) {
                             const auto n = o.grad.size();
                             if (Real* ga = grad_sink(ai)) {
                               for (std::size_t i = 0; i < n; ++i) ga[i] += o.grad[i] * bi->values[i];
                             }
                             if (Real* gb = grad_sink(bi)) {
                               for (std::size_t i = 0; i < n; ++i) gb[i] += o.grad[i] * ai->values[i];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> scale(const BasicTensor<Real>& x, Real factor) {
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  auto xi = x.impl();
  return make_result<Real>(x.shape(), std::move(out), "scale", {xi},
                           [xi, factor](const detail::TensorImpl<Real>& o) {
                             if (Real* gx = grad_sink(xi)) {
                               for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i] * factor;
                             }
                           });
}

template <typename Real>
BasicTensor<Real> gelu(const BasicTensor<Real>& x) {
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  const Real inv_sqrt2 = Real(1) / std::sqrt(Real(2));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Real(0.5) * xv[i] * (Real(1) + std::erf(xv[i] * inv_sqrt2));
  }
  auto xi = x.impl();
  return make_result<Real>(x.shape(), std::move(out), "gelu",
                           {xi}, [xi, inv_sqrt2](const detail::TensorImpl<Real>& o) {
                             Real* gx = grad_sink(xi);
                             if (!gx) return;
                             const Real inv_sqrt_2pi = Real(1) / std::sqrt(Real(2) * std::numbers::pi_v<Real>);
                             for (std::size_t i = 0; i < o.grad.size(); ++i) {
                               const Real v = xi->values[i];
                               const Real cdf = Real(0.5) * (Real(1) + std::erf(v * inv_sqrt2));
                               const Real pdf = inv_sqrt_2pi * std::exp(Real(-0.5) * v * v);
                               gx[i] += o.grad[i] * (cdf + v * pdf);
                             }
                           });
}

template <typename Real>
BasicTensor<Real> softmax(const BasicTensor<Real>& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw IndexError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      Real total = 0;
      for (std::size_t j = 0; j < len; ++j) {
        const Real e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  auto xi = x.impl();
  return make_result<Real>(s, std::move(out), "softmax", {xi},
                           [xi, outer, inner, len](const detail::TensorImpl<Real>& o) {
                             Real* gx = grad_sink(xi);
                             if (!gx) return;
                             const auto& y = o.values;
                             const auto& g = o.grad;
                             for (std::size_t a = 0; a < outer; ++a) {
                               for (std::size_t in = 0; in < inner; ++in) {
                                 const std::size_t base = a * len * inner + in;
                                 Real dot = 0;
                                 for (std::size_t j = 0; j < len; ++j) {
                                   dot += g[base + j * inner] * y[base + j * inner];
                                 }
                                 for (std::size_t j = 0; j < len; ++j) {
                                   const std::size_t idx = base + j * inner;
                                   gx[idx] += y[idx] * (g[idx] - dot);
                                 }
                               }
                             }
                           });
}

template <typename Real>
BasicTensor<Real> layer_norm(const BasicTensor<Real>& x, const BasicTensor<Real>& gain,
                             const BasicTensor<Real>& bias, double eps) {
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match last axis of " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<Real> out(xv.size());
  std::vector<Real> xhat(xv.size());
  std::vector<Real> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = xv.data() + r * d;
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<Real>(d);
    const Real rs = Real(1) / std::sqrt(var + static_cast<Real>(eps));
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const Real h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  auto xi = x.impl();
  auto gi = gain.impl();
  auto bi = bias.impl();
  return make_result<Real>(
      x.shape(), std::move(out), "layer_norm", {xi, gi, bi},
      [xi, gi, bi, xhat = std::move(xhat), rstd = std::move(rstd), rows,
       d](const detail::TensorImpl<Real>& o) {
        const auto& g = o.grad;
        if (Real* gg = grad_sink(gi)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[r * d + j];
          }
        }
        if (Real* gb = grad_sink(bi)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
          }
        }
        if (Real* gx = grad_sink(xi)) {
          const auto& gain_v = gi->values;
          std::vector<Real> dh(d);
          for (std::size_t r = 0; r < rows; ++r) {
            Real mean_dh = 0, mean_dh_h = 0;
            for (std::size_t j = 0; j < d; ++j) {
              dh[j] = g[r * d + j] * gain_v[j];
              mean_dh += dh[j];
              mean_dh_h += dh[j] * xhat[r * d + j];
            }
            mean_dh /= static_cast<Real>(d);
            mean_dh_h /= static_cast<Real>(d);
            for (std::size_t j = 0; j < d; ++j) {
              gx[r * d + j] += rstd[r] * (dh[j] - mean_dh - xhat[r * d + j] * mean_dh_h);
            }
          }
        }
      });
}

template <typename Real>
BasicTensor<Real> l1_loss(const BasicTensor<Real>& pred, const BasicTensor<Real>& target,
                          std::span<const std::uint8_t> mask) {
  require_same_shape(pred, target, "l1_loss");
  if (mask.size() != pred.numel()) {
    throw DimensionError("l1_loss: mask has " + std::to_string(mask.size()) +
                         " entries for shape " + shape_str(pred.shape()));
  }
  const auto pv = pred.values(), tv = target.values();
  std::size_t count = 0;
  Real total = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (!mask[i]) continue;
    total += std::abs(pv[i] - tv[i]);
    ++count;
  }
  if (count == 0) throw ProtocolError("l1_loss: mask selects no elements");
  const Real inv = Real(1) / static_cast<Real>(count);
  std::vector<std::uint8_t> sel(mask.begin(), mask.end());
  auto pi = pred.impl();
  auto ti = target.impl();
  // Only the prediction is an input of the node: nothing flows into target.
  return make_result<Real>({1}, {total * inv}, "l1_loss", {pi},
                           [pi, ti, sel = std::move(sel), inv](const detail::TensorImpl<Real>& o) {
                             Real* gp = grad_sink(pi);
                             if (!gp) return;
                             const Real g = o.grad[0] * inv;
                             for (std::size_t i = 0; i < sel.size(); ++i) {
                               if (!sel[i]) continue;
                               const Real diff = pi->values[i] - ti->values[i];
                               if (diff > 0) gp[i] += g;
                               else if (diff < 0) gp[i] -= g;
                             }
                           });
}

template <typename Real>
BasicTensor<Real> l1_loss(const BasicTensor<Real>& pred, const BasicTensor<Real>& target) {
  const std::vector<std::uint8_t> all(pred.numel(), 1);
  return l1_loss(pred, target, std::span<const std::uint8_t>(all));
}

template <typename Real>
BasicTensor<Real> cross_entropy(const BasicTensor<Real>& logits, std::size_t label) {
  const std::size_t k = logits.numel();
  if (!(logits.rank() == 1 || (logits.rank() == 2 && logits.dim(0) == 1))) {
    throw DimensionError("cross_entropy: logits must be (K) or (1 x K), got " +
                         shape_str(logits.shape()));
  }
  if (label >= k) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(k) + " classes");
  }
  const auto v = logits.values();
  const Real mx = *std::max_element(v.begin(), v.end());
  Real total = 0;
  for (auto x : v) total += std::exp(x - mx);
  const Real lse = mx + std::log(total);
  auto li = logits.impl();
  return make_result<Real>({1}, {lse - v[label]}, "cross_entropy", {li},
                           [li, label, lse](const detail::TensorImpl<Real>& o) {
                             Real* gl = grad_sink(li);
                             if (!gl) return;
                             const Real g = o.grad[0];
                             for (std::size_t i = 0; i < li->values.size(); ++i) {
                               const Real p = std::exp(li->values[i] - lse);
                               gl[i] += g * (p - (i == label ? Real(1) : Real(0)));
                             }
                           });
}

template <typename Real>
BasicTensor<Real> sum(const BasicTensor<Real>& x) {
  Real total = 0;
  for (auto v : x.values()) total += v;
  auto xi = x.impl();
  return make_result<Real>({1}, {total}, "sum", {xi}, [xi](const detail::TensorImpl<Real>& o) {
    if (Real* gx = grad_sink(xi)) {
      for (std::size_t i = 0; i < xi->values.size(); ++i) gx[i] += o.grad[0];
    }
  });
}

template <typename Real>
BasicTensor<Real> mean(const BasicTensor<Real>& x) {
  return scale(sum(x), Real(1) / static_cast<Real>(x.numel()));
}

template <typename Real>
BasicTensor<Real> reshape(const BasicTensor<Real>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  }
  auto xi = x.impl();
  std::vector<Real> values(x.values().begin(), x.values().end());
  return make_result<Real>(std::move(shape), std::move(values), "reshape", {xi},
                           [xi](const detail::TensorImpl<Real>& o) {
                             if (Real* gx = grad_sink(xi)) {
                               for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> transpose(const BasicTensor<Real>& x) {
  require_matrix(x, "transpose");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<Real> out(m * n);
  kernel::transpose(x.values().data(), out.data(), m, n);
  auto xi = x.impl();
  return make_result<Real>({n, m}, std::move(out), "transpose", {xi},
                           [xi, m, n](const detail::TensorImpl<Real>& o) {
                             Real* gx = grad_sink(xi);
                             if (!gx) return;
                             for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += o.grad[j * m + i];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> slice_cols(const BasicTensor<Real>& x, std::size_t start, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || start + count > cols) {
    throw IndexError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") outside " + std::to_string(cols) + " columns");
  }
  const auto xv = x.values();
  std::vector<Real> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * cols + start, count, out.data() + r * count);
  }
  auto xi = x.impl();
  return make_result<Real>({rows, count}, std::move(out), "slice_cols", {xi},
                           [xi, rows, cols, start, count](const detail::TensorImpl<Real>& o) {
                             Real* gx = grad_sink(xi);
                             if (!gx) return;
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < count; ++c) {
                                 gx[r * cols + start + c] += o.grad[r * count + c];
                               }
                             }
                           });
}

template <typename Real>
BasicTensor<Real> concat_cols(const std::vector<BasicTensor<Real>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t rows = parts.front().dim(0);
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    }
    cols += p.dim(1);
  }
  std::vector<Real> out(rows * cols);
  std::vector<ImplPtr<Real>> inputs;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    const auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(pv.data() + r * w, w, out.data() + r * cols + off);
    inputs.push_back(p.impl());
    offsets.push_back(off);
    off += w;
  }
  auto captured = inputs;
  return make_result<Real>({rows, cols}, std::move(out), "concat_cols", std::move(inputs),
                           [captured, offsets, rows, cols](const detail::TensorImpl<Real>& o) {
                             for (std::size_t p = 0; p < captured.size(); ++p) {
                               Real* gp = grad_sink(captured[p]);
                               if (!gp) continue;
                               const std::size_t w = captured[p]->shape[1];
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t c = 0; c < w; ++c) {
                                   gp[r * w + c] += o.grad[r * cols + offsets[p] + c];
                                 }
                               }
                             }
                           });
}

template <typename Real>
BasicTensor<Real> gather_rows(const BasicTensor<Real>& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  if (rows.empty()) throw DimensionError("gather_rows: empty row selection");
  const std::size_t n = x.dim(0), d = x.dim(1);
  const auto xv = x.values();
  std::vector<Real> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                       std::to_string(n) + " rows");
    }
    std::copy_n(xv.data() + rows[i] * d, d, out.data() + i * d);
  }
  auto xi = x.impl();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result<Real>({rows.size(), d}, std::move(out), "gather_rows", {xi},
                           [xi, idx = std::move(idx), d](const detail::TensorImpl<Real>& o) {
                             Real* gx = grad_sink(xi);
                             if (!gx) return;
                             for (std::size_t i = 0; i < idx.size(); ++i) {
                               for (std::size_t c = 0; c < d; ++c) gx[idx[i] * d + c] += o.grad[i * d + c];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> concat_rows(const std::vector<BasicTensor<Real>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t d = parts.front().dim(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.dim(1) != d) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    rows += p.dim(0);
  }
  std::vector<Real> out;
  out.reserve(rows * d);
  std::vector<ImplPtr<Real>> inputs;
  for (const auto& p : parts) {
    const auto pv = p.values();
    out.insert(out.end(), pv.begin(), pv.end());
    inputs.push_back(p.impl());
  }
  auto captured = inputs;
  return make_result<Real>({rows, d}, std::move(out), "concat_rows", std::move(inputs),
                           [captured](const detail::TensorImpl<Real>& o) {
                             std::size_t off = 0;
                             for (const auto& p : captured) {
                               const std::size_t n = p->values.size();
                               if (Real* gp = grad_sink(p)) {
                                 for (std::size_t i = 0; i < n; ++i) gp[i] += o.grad[off + i];
                               }
                               off += n;
                             }
                           });
}

template <typename Real>
BasicTensor<Real> expand_rows(const BasicTensor<Real>& x, std::size_t n) {
  if (!(x.rank() == 1 || (x.rank() == 2 && x.dim(0) == 1))) {
    throw DimensionError("expand_rows: expected (D) or (1 x D), got " + shape_str(x.shape()));
  }
  if (n == 0) throw DimensionError("expand_rows: zero rows");
  const std::size_t d = x.numel();
  const auto xv = x.values();
  std::vector<Real> out(n * d);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(xv.data(), d, out.data() + r * d);
  auto xi = x.impl();
  return make_result<Real>({n, d}, std::move(out), "expand_rows", {xi},
                           [xi, n, d](const detail::TensorImpl<Real>& o) {
                             Real* gx = grad_sink(xi);
                             if (!gx) return;
                             for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t c = 0; c < d; ++c) gx[c] += o.grad[r * d + c];
                             }
                           });
}

template <typename Real>
BasicTensor<Real> mean_rows(const BasicTensor<Real>& x) {
  require_matrix(x, "mean_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  const auto xv = x.values();
  std::vector<Real> out(d, Real(0));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) out[c] += xv[r * d + c];
  }
  const Real inv = Real(1) / static_cast<Real>(n);
  for (auto& v : out) v *= inv;
  auto xi = x.impl();
  return make_result<Real>({1, d}, std::move(out), "mean_rows", {xi},
                           [xi, n, d, inv](const detail::TensorImpl<Real>& o) {
                             Real* gx = grad_sink(xi);
                             if (!gx) return;
                             for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += o.grad[c] * inv;
                             }
                           });
}

template <typename Real>
BasicTensor<Real> affine(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>& bias) {
  auto y = matmul(x, weight);
  return add(y, expand_rows(bias, y.dim(0)));
}

#define JEPA_FER_INSTANTIATE_OPS(Real)                                                            \
  template BasicTensor<Real> matmul(const BasicTensor<Real>&, const BasicTensor<Real>&);          \
  template BasicTensor<Real> add(const BasicTensor<Real>&, const BasicTensor<Real>&);             \
  template BasicTensor<Real> sub(const BasicTensor<Real>&, const BasicTensor<Real>&);             \
  template BasicTensor<Real> mul(const BasicTensor<Real>&, const BasicTensor<Real>&);             \
  template BasicTensor<Real> scale(const BasicTensor<Real>&, Real);                               \
  template BasicTensor<Real> gelu(const BasicTensor<Real>&);                                      \
  template BasicTensor<Real> softmax(const BasicTensor<Real>&, std::size_t);                      \
  template BasicTensor<Real> layer_norm(const BasicTensor<Real>&, const BasicTensor<Real>&,       \
                                        const BasicTensor<Real>&, double);                        \
  template BasicTensor<Real> l1_loss(const BasicTensor<Real>&, const BasicTensor<Real>&,          \
                                     std::span<const std::uint8_t>);                              \
  template BasicTensor<Real> l1_loss(const BasicTensor<Real>&, const BasicTensor<Real>&);         \
  template BasicTensor<Real> cross_entropy(const BasicTensor<Real>&, std::size_t);                \
  template BasicTensor<Real> sum(const BasicTensor<Real>&);                                       \
  template BasicTensor<Real> mean(const BasicTensor<Real>&);                                      \
  template BasicTensor<Real> reshape(const BasicTensor<Real>&, Shape);                            \
  template BasicTensor<Real> transpose(const BasicTensor<Real>&);                                 \
  template BasicTensor<Real> slice_cols(const BasicTensor<Real>&, std::size_t, std::size_t);      \
  template BasicTensor<Real> concat_cols(const std::vector<BasicTensor<Real>>&);                  \
  template BasicTensor<Real> gather_rows(const BasicTensor<Real>&, std::span<const std::size_t>); \
  template BasicTensor<Real> concat_rows(const std::vector<BasicTensor<Real>>&);                  \
  template BasicTensor<Real> expand_rows(const BasicTensor<Real>&, std::size_t);                  \
  template BasicTensor<Real> mean_rows(const BasicTensor<Real>&);                                 \
  template BasicTensor<Real> affine(const BasicTensor<Real>&, const BasicTensor<Real>&,           \
                                    const BasicTensor<Real>&);

JEPA_FER_INSTANTIATE_OPS(float)
JEPA_FER_INSTANTIATE_OPS(double)

}  // namespace jepa_fer
