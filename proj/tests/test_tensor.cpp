#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "jepa_fer/error.hpp"
#include "jepa_fer/gradcheck.hpp"
#include "jepa_fer/ops.hpp"
#include "jepa_fer/rng.hpp"
#include "jepa_fer/tensor.hpp"

using namespace jepa_fer;

namespace {

Tensor64 mat(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor64::from_values({r, c}, std::move(v)); }

Tensor64 vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor64::from_values({n}, std::move(v));
}

void expect_values(const Tensor64& t, const std::vector<double>& want, double tol = 0.0) {
  ASSERT_EQ(t.numel(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.value(i), want[i], tol) << "index " << i;
}

}  // namespace

TEST(Tensor, ShapeAndValueCount) {
  auto t = Tensor::zeros({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.values().size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_THROW(Tensor::from_values({2, 2}, {1.f, 2.f, 3.f}), DimensionError);
}

TEST(Matmul, Identity) {
  auto a = mat(2, 2, {1, 2, 3, 4});
  expect_values(matmul(a, mat(2, 2, {1, 0, 0, 1})), {1, 2, 3, 4});
}

TEST(Matmul, HandExample) {
  expect_values(matmul(mat(2, 2, {1, 2, 3, 4}), mat(2, 2, {5, 6, 7, 8})), {19, 22, 43, 50});
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor64::zeros({2, 3}), Tensor64::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  Rng rng(3);
  const std::vector<Tensor64> in{Tensor64::randn({3, 4}, rng), Tensor64::randn({4, 5}, rng)};
  const double err =
      gradcheck_rel_error([](const std::vector<Tensor64>& x) { return sum(matmul(x[0], x[1])); }, in);
  EXPECT_LT(err, 1e-6);
}

TEST(Matmul, LargerBlockedShapesMatchNaive) {
  Rng rng(9);
  auto a = Tensor64::randn({7, 13}, rng);
  auto b = Tensor64::randn({13, 9}, rng);
  auto c = matmul(a, b);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 13; ++k) s += a.value(i * 13 + k) * b.value(k * 9 + j);
      EXPECT_NEAR(c.value(i * 9 + j), s, 1e-12);
    }
}

TEST(Elementwise, AddZerosIsIdentity) {
  auto x = vec({1.5, -2, 3});
  expect_values(add(x, Tensor64::zeros({3})), {1.5, -2, 3});
}

TEST(Elementwise, SubMulScale) {
  auto a = vec({1, 2, 3});
  auto b = vec({4, 5, 6});
  expect_values(sub(a, b), {-3, -3, -3});
  expect_values(mul(a, b), {4, 10, 18});
  expect_values(scale(a, 2.0), {2, 4, 6});
}

TEST(Elementwise, ShapeMismatchThrows) {
  EXPECT_THROW(add(Tensor64::zeros({3}), Tensor64::zeros({1, 3})), DimensionError);
  EXPECT_THROW(mul(Tensor64::zeros({2, 2}), Tensor64::zeros({4})), DimensionError);
}

TEST(Gelu, ZeroMapsToZero) { EXPECT_EQ(gelu(vec({0.0})).item(), 0.0); }

TEST(Gelu, MatchesErfDefinition) {
  const std::vector<double> xs{-3, -1, -0.5, 0.25, 1, 2.5};
  auto y = gelu(vec(xs));
  for (std::size_t i = 0; i < xs.size(); ++i)
    EXPECT_NEAR(y.value(i), 0.5 * xs[i] * (1 + std::erf(xs[i] / std::sqrt(2.0))), 1e-15);
}

TEST(Gelu, GradientAtRandomPoints) {
  Rng rng(11);
  const std::vector<Tensor64> in{Tensor64::uniform({20}, rng, -4, 4)};
  EXPECT_LT(gradcheck_rel_error([](const std::vector<Tensor64>& x) { return sum(gelu(x[0])); }, in), 1e-5);
}

TEST(Softmax, Symmetric) { expect_values(softmax(vec({0, 0}), 0), {0.5, 0.5}, 1e-15); }

TEST(Softmax, LogThree) { expect_values(softmax(vec({0, std::log(3.0)}), 0), {0.25, 0.75}, 1e-15); }

TEST(Softmax, ShiftInvariant) {
  Rng rng(5);
  auto x = Tensor64::randn({4, 6}, rng);
  auto shifted = add(x, Tensor64::full({4, 6}, 123.25));
  for (std::size_t axis : {0u, 1u}) {
    auto a = softmax(x, axis);
    auto b = softmax(shifted, axis);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.value(i), b.value(i), 1e-6);
  }
}

TEST(Softmax, RowsSumToOneAndPositive) {
  Rng rng(6);
  auto p = softmax(Tensor64::randn({3, 5}, rng, 10.0), 1);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_GT(p.value(r * 5 + c), 0.0);
      s += p.value(r * 5 + c);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Softmax, BadAxisThrows) { EXPECT_THROW(softmax(Tensor64::zeros({2, 2}), 2), IndexError); }

TEST(LayerNorm, ConstantVectorGivesZeros) {
  auto y = layer_norm(vec({3, 3, 3, 3}), Tensor64::full({4}, 1.0), Tensor64::zeros({4}), 1e-5);
  expect_values(y, {0, 0, 0, 0}, 1e-12);
}

TEST(LayerNorm, OutputStatisticsFollowGainAndBias) {
  Rng rng(8);
  const std::size_t n = 2000;
  const std::size_t d = 4;
  auto x = Tensor64::randn({n, d}, rng, 3.0);
  auto gain = vec({0.5, 1.0, 2.0, 3.0});
  auto bias = vec({-1.0, 0.0, 1.0, 2.0});
  auto y = layer_norm(x, gain, bias, 1e-5);
  // Every row has zero mean and unit variance before the affine part.
  for (std::size_t r = 0; r < n; r += 97) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < d; ++c) m += (y.value(r * d + c) - bias.value(c)) / gain.value(c);
    m /= d;
    for (std::size_t c = 0; c < d; ++c) {
      const double z = (y.value(r * d + c) - bias.value(c)) / gain.value(c);
      v += (z - m) * (z - m);
    }
    EXPECT_NEAR(m, 0.0, 1e-3);
    EXPECT_NEAR(v / d, 1.0, 1e-3);
  }
  // The affine part is applied per column after normalization.
  auto plain = layer_norm(x, vec({1.0, 1.0, 1.0, 1.0}), vec({0.0, 0.0, 0.0, 0.0}), 1e-5);
  double worst = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c)
      worst = std::max(worst, std::abs(y.value(r * d + c) - (gain.value(c) * plain.value(r * d + c) + bias.value(c))));
  EXPECT_LT(worst, 1e-12);
}

TEST(LayerNorm, NonPositiveEpsIsConfigError) {
  EXPECT_THROW(layer_norm(vec({1, 2}), vec({1, 1}), vec({0, 0}), 0.0), ConfigError);
  EXPECT_THROW(layer_norm(vec({1, 2}), vec({1, 1}), vec({0, 0}), -1e-5), ConfigError);
}

TEST(LayerNorm, GainShapeMismatch) {
  EXPECT_THROW(layer_norm(Tensor64::zeros({2, 3}), vec({1, 1}), vec({0, 0})), DimensionError);
}

TEST(LayerNorm, GradientCheck) {
  Rng rng(12);
  const std::vector<Tensor64> in{Tensor64::randn({3, 5}, rng), Tensor64::randn({5}, rng), Tensor64::randn({5}, rng),
                                 Tensor64::randn({3, 5}, rng)};
  const double err = gradcheck_rel_error(
      [](const std::vector<Tensor64>& x) { return sum(mul(layer_norm(x[0], x[1], x[2], 1e-5), x[3])); }, in);
  EXPECT_LT(err, 1e-4);
}

TEST(L1Loss, EqualInputsGiveZero) { EXPECT_EQ(l1_loss(vec({1, 2, 3}), vec({1, 2, 3})).item(), 0.0); }

TEST(L1Loss, FullMask) {
  const std::vector<std::uint8_t> m{1, 1};
  EXPECT_EQ(l1_loss(vec({1, 2}), vec({0, 0}), m).item(), 1.5);
}

TEST(L1Loss, PartialMask) {
  const std::vector<std::uint8_t> m{1, 0};
  EXPECT_EQ(l1_loss(vec({1, 2}), vec({0, 0}), m).item(), 1.0);
}

TEST(L1Loss, EmptyMaskIsProtocolError) {
  const std::vector<std::uint8_t> m{0, 0};
  EXPECT_THROW(l1_loss(vec({1, 2}), vec({0, 0}), m), ProtocolError);
}

TEST(L1Loss, TargetGetsNoGradient) {
  auto pred = vec({1, -2, 3});
  pred.set_requires_grad(true);
  auto target = vec({0, 0, 0});
  target.set_requires_grad(true);
  auto loss = l1_loss(pred, target);
  backward(loss);
  EXPECT_TRUE(pred.has_grad());
  EXPECT_FALSE(target.has_grad());
  EXPECT_NEAR(pred.grad()[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(pred.grad()[1], -1.0 / 3.0, 1e-15);
}

TEST(CrossEntropy, Uniform) { EXPECT_NEAR(cross_entropy(vec({0, 0}), 0).item(), std::log(2.0), 1e-15); }

TEST(CrossEntropy, LargeLogitsStayFinite) {
  const double v = cross_entropy(vec({1000, -1000}), 0).item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_NEAR(cross_entropy(Tensor::from_values({2}, {1000.f, -1000.f}), 1).item(), 2000.0, 1e-2);
}

TEST(CrossEntropy, LabelOutOfRange) { EXPECT_THROW(cross_entropy(vec({0, 0, 0}), 3), IndexError); }

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  auto logits = vec({0.3, -1.2, 2.0, 0.5});
  logits.set_requires_grad(true);
  backward(cross_entropy(logits, 2));
  auto p = softmax(vec({0.3, -1.2, 2.0, 0.5}), 0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(logits.grad()[i], p.value(i) - (i == 2 ? 1.0 : 0.0), 1e-14);
  const std::vector<Tensor64> in{vec({0.3, -1.2, 2.0, 0.5})};
  EXPECT_LT(gradcheck_rel_error([](const std::vector<Tensor64>& x) { return cross_entropy(x[0], 2); }, in), 1e-6);
}

TEST(Backward, SumGivesOnes) {
  auto x = vec({1, 2, 3});
  x.set_requires_grad(true);
  backward(sum(x));
  ASSERT_TRUE(x.has_grad());
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, ReuseAccumulates) {
  auto x = vec({1, 2, 3});
  x.set_requires_grad(true);
  auto y = scale(x, 1.0);
  backward(add(sum(y), sum(y)));
  for (double g : x.grad()) EXPECT_EQ(g, 2.0);
}

TEST(Backward, LeafGradsAccumulateAcrossCalls) {
  auto x = vec({1, 2});
  x.set_requires_grad(true);
  backward(sum(x));
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 2.0);
  x.clear_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, DetachedTensorIsUsageError) {
  EXPECT_THROW(backward(vec({1.0}).detach()), UsageError);
  auto x = vec({1, 2});
  x.set_requires_grad(true);
  EXPECT_THROW(backward(sum(x).detach()), UsageError);
}

TEST(Backward, NonScalarIsUsageError) {
  auto x = vec({1, 2});
  x.set_requires_grad(true);
  EXPECT_THROW(backward(scale(x, 2.0)), UsageError);
}

TEST(Backward, NoRequiresGradMeansNoGrad) {
  auto frozen = vec({1, 2});
  auto live = vec({3, 4});
  live.set_requires_grad(true);
  backward(sum(mul(frozen, live)));
  EXPECT_FALSE(frozen.has_grad());
  ASSERT_TRUE(live.has_grad());
  EXPECT_EQ(live.grad()[0], 1.0);
  EXPECT_EQ(live.grad()[1], 2.0);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  auto x = vec({1, 2});
  x.set_requires_grad(true);
  Tensor64 y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(NoGradGuard::grad_enabled());
    y = sum(mul(x, x));
  }
  EXPECT_TRUE(NoGradGuard::grad_enabled());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(backward(y), UsageError);
}

TEST(Backward, BitIdenticalAcrossRuns) {
  auto run = [] {
    Rng rng(21);
    auto w = Tensor64::randn({6, 6}, rng);
    w.set_requires_grad(true);
    auto x = Tensor64::randn({4, 6}, rng);
    auto h = gelu(matmul(x, w));
    backward(sum(mul(softmax(h, 1), h)));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, TopologicalOrder) {
  auto a = vec({1, 2});
  a.set_requires_grad(true);
  auto b = scale(a, 2.0);
  auto c = mul(b, a);
  auto loss = sum(add(c, b));
  auto tape = BasicTape<double>::record(loss);
  EXPECT_EQ(tape.size(), 4u);
  // Each node comes after the producers of its inputs.
  const auto& order = tape.order();
  for (std::size_t i = 0; i < order.size(); ++i)
    for (const auto& in : order[i]->grad_fn->inputs) {
      if (!in->grad_fn) continue;
      bool found = false;
      for (std::size_t j = 0; j < i; ++j) found = found || order[j] == in;
      EXPECT_TRUE(found) << "node " << i << " precedes an input producer";
    }
  EXPECT_EQ(order.back(), loss.impl());
}

TEST(Tape, LeavesListedOnce) {
  auto a = vec({1, 2});
  auto b = vec({3, 4});
  a.set_requires_grad(true);
  auto loss = sum(add(mul(a, b), mul(a, a)));
  auto leaves = BasicTape<double>::record(loss).leaves();
  EXPECT_EQ(leaves.size(), 2u);
}

TEST(ShapeOps, ReshapeTransposeSliceConcat) {
  auto x = mat(2, 3, {1, 2, 3, 4, 5, 6});
  expect_values(transpose(x), {1, 4, 2, 5, 3, 6});
  EXPECT_EQ(reshape(x, {3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(reshape(x, {4, 2}), DimensionError);
  auto s = slice_cols(x, 1, 2);
  expect_values(s, {2, 3, 5, 6});
  expect_values(concat_cols<double>({slice_cols(x, 0, 1), s}), {1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> rows{1, 0, 1};
  expect_values(gather_rows(x, rows), {4, 5, 6, 1, 2, 3, 4, 5, 6});
  expect_values(concat_rows<double>({x, x}), {1, 2, 3, 4, 5, 6, 1, 2, 3, 4, 5, 6});
  expect_values(expand_rows(vec({7, 8}), 2), {7, 8, 7, 8});
  expect_values(mean_rows(x), {2.5, 3.5, 4.5});
  EXPECT_THROW(slice_cols(x, 2, 2), IndexError);
}

TEST(GradCheck, EveryPrimitiveTwentySeeds) {
  const auto results = primitive_gradcheck_suite(2024, 20, 1e-4);
  ASSERT_FALSE(results.empty());
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " rel err " << r.max_rel_error;
    EXPECT_EQ(r.trials, 20u) << r.name;
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // Central differences of a function whose recorded backward is detached
  // disagree with its (empty) analytic gradient.
  const std::vector<Tensor64> in{vec({0.5, 1.5})};
  const double err = gradcheck_rel_error(
      [](const std::vector<Tensor64>& x) { return add(sum(x[0]), sum(mul(x[0], x[0])).detach()); }, in);
  EXPECT_GT(err, 1e-2);
}
