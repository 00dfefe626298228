#include "jepa_fer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "jepa_fer/error.hpp"
#include "jepa_fer/ops.hpp"

namespace jepa_fer {

namespace {

std::vector<Tensor64> fresh_leaves(const std::vector<Tensor64>& inputs, bool requires_grad) {
  std::vector<Tensor64> out;
  out.reserve(inputs.size());
  for (const auto& t : inputs) {
    auto copy = t.detach();
    copy.set_requires_grad(requires_grad);
    out.push_back(copy);
  }
  return out;
}

double eval_scalar(const ScalarFn64& fn, const std::vector<Tensor64>& inputs) {
  NoGradGuard guard;
  return fn(inputs).item();
}

}  // namespace

std::vector<std::vector<double>> numeric_gradient(const ScalarFn64& fn,
                                                  const std::vector<Tensor64>& inputs, double h) {
  auto work = fresh_leaves(inputs, false);
  std::vector<std::vector<double>> grads;
  for (auto& t : work) {
    std::vector<double> g(t.numel());
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + h;
      const double plus = eval_scalar(fn, work);
      v[i] = orig - h;
      const double minus = eval_scalar(fn, work);
      v[i] = orig;
      g[i] = (plus - minus) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<std::vector<double>> analytic_gradient(const ScalarFn64& fn,
                                                   const std::vector<Tensor64>& inputs) {
  auto leaves = fresh_leaves(inputs, true);
  backward(fn(leaves));
  std::vector<std::vector<double>> grads;
  for (const auto& t : leaves) {
    if (t.has_grad()) {
      grads.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      grads.emplace_back(t.numel(), 0.0);
    }
  }
  return grads;
}

double relative_error(const std::vector<std::vector<double>>& analytic,
                      const std::vector<std::vector<double>>& numeric) {
  if (analytic.size() != numeric.size()) throw DimensionError("relative_error: input count mismatch");
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (analytic[i].size() != numeric[i].size()) throw DimensionError("relative_error: size mismatch");
    for (std::size_t j = 0; j < analytic[i].size(); ++j) {
      const double a = analytic[i][j], n = numeric[i][j];
      diff += (a - n) * (a - n);
      na += a * a;
      nn += n * n;
    }
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
  return std::sqrt(diff) / denom;
}

double gradcheck_rel_error(const ScalarFn64& fn, const std::vector<Tensor64>& inputs, double h) {
  return relative_error(analytic_gradient(fn, inputs), numeric_gradient(fn, inputs, h));
}

namespace {

struct PrimitiveCase {
  std::string name;
  // Builds (inputs, fn) for one trial.
  std::function<std::pair<std::vector<Tensor64>, ScalarFn64>(Rng&)> make;
};

/// sum(y * w) with fixed random w, so the loss depends on every output.
Tensor64 weighted_sum(const Tensor64& y, const Tensor64& w) { return sum(mul(y, w)); }

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  auto unary = [&cases](std::string name, Shape shape,
                        std::function<Tensor64(const Tensor64&)> f) {
    cases.push_back({name, [shape, f](Rng& rng) {
                       auto x = Tensor64::randn(shape, rng);
                       auto probe = f(x.detach());
                       auto w = Tensor64::randn(probe.shape(), rng);
                       ScalarFn64 fn = [f, w](const std::vector<Tensor64>& in) {
                         return weighted_sum(f(in[0]), w);
                       };
                       return std::make_pair(std::vector<Tensor64>{x}, fn);
                     }});
  };
  auto binary = [&cases](std::string name, Shape sa, Shape sb,
                         std::function<Tensor64(const Tensor64&, const Tensor64&)> f) {
    cases.push_back({name, [sa, sb, f](Rng& rng) {
                       auto a = Tensor64::randn(sa, rng);
                       auto b = Tensor64::randn(sb, rng);
                       auto probe = f(a.detach(), b.detach());
                       auto w = Tensor64::randn(probe.shape(), rng);
                       ScalarFn64 fn = [f, w](const std::vector<Tensor64>& in) {
                         return weighted_sum(f(in[0], in[1]), w);
                       };
                       return std::make_pair(std::vector<Tensor64>{a, b}, fn);
                     }});
  };

  binary("matmul", {3, 4}, {4, 5}, [](auto& a, auto& b) { return matmul(a, b); });
  binary("add", {3, 4}, {3, 4}, [](auto& a, auto& b) { return add(a, b); });
  binary("sub", {3, 4}, {3, 4}, [](auto& a, auto& b) { return sub(a, b); });
  binary("mul", {3, 4}, {3, 4}, [](auto& a, auto& b) { return mul(a, b); });
  unary("scale", {3, 4}, [](auto& x) { return scale(x, 0.37); });
  unary("gelu", {20}, [](auto& x) { return gelu(x); });
  unary("softmax_axis0", {4, 3}, [](auto& x) { return softmax(x, 0); });
  unary("softmax_axis1", {3, 5}, [](auto& x) { return softmax(x, 1); });
  cases.push_back({"layer_norm", [](Rng& rng) {
                     auto x = Tensor64::randn({3, 6}, rng);
                     auto g = Tensor64::randn({6}, rng);
                     auto b = Tensor64::randn({6}, rng);
                     auto w = Tensor64::randn({3, 6}, rng);
                     ScalarFn64 fn = [w](const std::vector<Tensor64>& in) {
                       return weighted_sum(layer_norm(in[0], in[1], in[2], 1e-5), w);
                     };
                     return std::make_pair(std::vector<Tensor64>{x, g, b}, fn);
                   }});
  cases.push_back({"l1_loss", [](Rng& rng) {
                     // Keep |pred - target| well away from the kink at 0.
                     std::vector<double> p(12), t(12);
                     std::vector<std::uint8_t> mask(12);
                     for (std::size_t i = 0; i < p.size(); ++i) {
                       t[i] = rng.normal();
                       const double gap = 0.1 + rng.uniform();
                       p[i] = t[i] + (rng.uniform() < 0.5 ? -gap : gap);
                       mask[i] = rng.uniform() < 0.7 ? 1 : 0;
                     }
                     mask[0] = 1;
                     auto target = Tensor64::from_values({3, 4}, t);
                     ScalarFn64 fn = [target, mask](const std::vector<Tensor64>& in) {
                       return l1_loss(in[0], target, std::span<const std::uint8_t>(mask));
                     };
                     return std::make_pair(std::vector<Tensor64>{Tensor64::from_values({3, 4}, p)}, fn);
                   }});
  cases.push_back({"cross_entropy", [](Rng& rng) {
                     auto logits = Tensor64::randn({6}, rng, 2.0);
                     const auto label = static_cast<std::size_t>(rng.below(6));
                     ScalarFn64 fn = [label](const std::vector<Tensor64>& in) {
                       return cross_entropy(in[0], label);
                     };
                     return std::make_pair(std::vector<Tensor64>{logits}, fn);
                   }});
  unary("sum", {3, 4}, [](auto& x) { return sum(x); });
  unary("mean", {3, 4}, [](auto& x) { return mean(x); });
  unary("reshape", {3, 4}, [](auto& x) { return reshape(x, {2, 6}); });
  unary("transpose", {3, 4}, [](auto& x) { return transpose(x); });
  unary("slice_cols", {3, 6}, [](auto& x) { return slice_cols(x, 2, 3); });
  binary("concat_cols", {3, 2}, {3, 4}, [](auto& a, auto& b) { return concat_cols<double>({a, b, a}); });
  unary("gather_rows", {5, 3}, [](auto& x) {
    const std::vector<std::size_t> rows{4, 0, 2, 0};
    return gather_rows(x, std::span<const std::size_t>(rows));
  });
  binary("concat_rows", {2, 3}, {4, 3}, [](auto& a, auto& b) { return concat_rows<double>({a, b}); });
  unary("expand_rows", {1, 4}, [](auto& x) { return expand_rows(x, 3); });
  unary("mean_rows", {5, 3}, [](auto& x) { return mean_rows(x); });
  cases.push_back({"affine", [](Rng& rng) {
                     auto x = Tensor64::randn({4, 3}, rng);
                     auto wt = Tensor64::randn({3, 5}, rng);
                     auto b = Tensor64::randn({5}, rng);
                     auto w = Tensor64::randn({4, 5}, rng);
                     ScalarFn64 fn = [w](const std::vector<Tensor64>& in) {
                       return weighted_sum(affine(in[0], in[1], in[2]), w);
                     };
                     return std::make_pair(std::vector<Tensor64>{x, wt, b}, fn);
                   }});
  return cases;
}

}  // namespace

std::vector<GradCheckResult> primitive_gradcheck_suite(std::uint64_t seed, std::size_t trials,
                                                       double tolerance) {
  std::vector<GradCheckResult> results;
  std::uint64_t stream = 0;
  for (const auto& c : primitive_cases()) {
    GradCheckResult r{c.name, 0.0, trials, tolerance, true};
    for (std::size_t t = 0; t < trials; ++t) {
      auto rng = Rng::derive(seed, stream++);
      auto [inputs, fn] = c.make(rng);
      r.max_rel_error = std::max(r.max_rel_error, gradcheck_rel_error(fn, inputs, 1e-5));
    }
    r.passed = r.max_rel_error < tolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace jepa_fer
