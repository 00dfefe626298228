#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "jepa_fer/error.hpp"
#include "jepa_fer/gradcheck.hpp"
#include "jepa_fer/ops.hpp"
#include "jepa_fer/vit/tokens.hpp"
#include "jepa_fer/vit/transformer.hpp"

using namespace jepa_fer;
using namespace jepa_fer::vit;

namespace {

EncoderConfig tiny_encoder(std::size_t depth = 2) {
  EncoderConfig cfg;
  cfg.frames = 4;
  cfg.height = 16;
  cfg.width = 16;
  cfg.tubelet = {2, 8, 8};
  cfg.embed_dim = 12;
  cfg.depth = depth;
  cfg.heads = 2;
  cfg.mlp_ratio = 2.0;
  return cfg;
}

data::FloatClip random_clip(const EncoderConfig& cfg, Rng& rng) {
  data::FloatClip clip{cfg.frames, cfg.height, cfg.width, {}};
  clip.data.resize(cfg.frames * cfg.height * cfg.width * 3);
  for (auto& x : clip.data) x = static_cast<float>(rng.normal());
  return clip;
}

template <typename Real>
double max_abs_diff(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a.value(i)) - double(b.value(i))));
  return m;
}

}  // namespace

TEST(Tubelets, TokenCounts) {
  EXPECT_EQ(grid_for(16, 224, 224, {}).tokens(), 1568u);
  EXPECT_EQ(grid_for(16, 224, 224, {}), (GridShape{8, 14, 14}));
  EXPECT_EQ(grid_for(16, 64, 64, {}).tokens(), 128u);
  EXPECT_THROW(grid_for(15, 64, 64, {}), ConfigError);
  EXPECT_THROW(grid_for(16, 60, 64, {}), ConfigError);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const TubeletConfig t{1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(5)};
    const std::size_t a = 1 + rng.below(4), b = 1 + rng.below(4), c = 1 + rng.below(4);
    EXPECT_EQ(grid_for(a * t.patch_t, b * t.patch_h, c * t.patch_w, t).tokens(), a * b * c);
  }
}

TEST(Tubelets, LayoutIsTHWThenWithinTubelet) {
  data::FloatClip clip{4, 4, 4, std::vector<float>(4 * 4 * 4 * 3)};
  for (std::size_t i = 0; i < clip.data.size(); ++i) clip.data[i] = static_cast<float>(i);
  const TubeletConfig cfg{2, 2, 2};
  auto tok = extract_tubelets<double>(clip, cfg);
  ASSERT_EQ(tok.shape(), (Shape{8, 24}));
  // Token (t=1, h=0, w=1), element (dt=1, dy=1, dx=0, c=2).
  const std::size_t row = (1 * 2 + 0) * 2 + 1;
  const std::size_t col = ((1 * 2 + 1) * 2 + 0) * 3 + 2;
  EXPECT_EQ(tok.value(row * 24 + col), clip.at(3, 1, 2, 2));
}

TEST(Tubelets, ZeroClipZeroBiasGivesZeroTokens) {
  Rng rng(1);
  const TubeletConfig t;
  data::FloatClip clip{16, 64, 64, std::vector<float>(16 * 64 * 64 * 3, 0.0f)};
  auto proj = Linear<float>::init(t.patch_volume(), 32, rng);
  auto tokens = proj(extract_tubelets<float>(clip, t));
  ASSERT_EQ(tokens.shape(), (Shape{128, 32}));
  for (float v : tokens.values()) EXPECT_EQ(v, 0.0f);
}

TEST(PosEmbed, OriginIsSinZeroCosOne) {
  const GridShape g{8, 4, 4};
  auto pe = posembed_3d<double>(g, 128);
  const std::size_t half = 128 / 6;
  for (std::size_t axis = 0; axis < 3; ++axis)
    for (std::size_t i = 0; i < half; ++i) {
      EXPECT_EQ(pe.value(axis * 2 * half + i), 0.0);
      EXPECT_EQ(pe.value(axis * 2 * half + half + i), 1.0);
    }
  EXPECT_EQ(pe.value(126), 0.0);  // leftover components
  EXPECT_EQ(pe.value(127), 0.0);
}

TEST(PosEmbed, RangeAndDistinctness) {
  const GridShape g{8, 4, 4};
  auto pe = posembed_3d<double>(g, 128);
  for (double v : pe.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  for (std::size_t a = 0; a < 128; ++a)
    for (std::size_t b = a + 1; b < 128; ++b) {
      double d = 0;
      for (std::size_t j = 0; j < 128; ++j) d = std::max(d, std::abs(pe.value(a * 128 + j) - pe.value(b * 128 + j)));
      EXPECT_GT(d, 1e-3) << a << " vs " << b;
    }
}

TEST(PosEmbed, AxisBlockMatchesSinusoid) {
  const GridShape g{3, 2, 5};
  const std::size_t dim = 18;  // half = 3 per axis
  auto pe = posembed_3d<double>(g, dim);
  const std::size_t token = g.index(2, 1, 4);
  const std::size_t pos[3] = {2, 1, 4};
  for (std::size_t axis = 0; axis < 3; ++axis)
    for (std::size_t i = 0; i < 3; ++i) {
      const double w = std::pow(10000.0, -static_cast<double>(i) / 3.0);
      EXPECT_NEAR(pe.value(token * dim + axis * 6 + i), std::sin(pos[axis] * w), 1e-15);
      EXPECT_NEAR(pe.value(token * dim + axis * 6 + 3 + i), std::cos(pos[axis] * w), 1e-15);
    }
}

TEST(TubeMask, RatioHalfOnFullGrid) {
  const GridShape g{8, 14, 14};
  Rng rng(2);
  auto m = gen_tube_mask(g, {0.5, 4, 4}, rng);
  EXPECT_GE(m.masked_spatial(), 98u);
  EXPECT_GE(m.masked_tokens().size(), 784u);
  EXPECT_EQ(m.masked_tokens().size(), m.masked_spatial() * 8);
}

TEST(TubeMask, TubePropertyAndBothSidesNonEmpty) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const GridShape g{1 + rng.below(8), 2 + rng.below(10), 2 + rng.below(10)};
    const std::size_t bh = 1 + rng.below(g.h), bw = 1 + rng.below(g.w);
    const double ratio = rng.uniform(0.05, 0.95);
    auto m = gen_tube_mask(g, {ratio, bh, bw}, rng);
    const auto tm = m.token_mask();
    for (std::size_t t = 0; t < g.t; ++t)
      for (std::size_t s = 0; s < g.spatial(); ++s) ASSERT_EQ(tm[t * g.spatial() + s], tm[s]);
    // The visible-cell guarantee wins when the ratio would mask everything.
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(ratio * g.spatial() - 1e-9)), g.spatial() - 1);
    ASSERT_GE(m.masked_spatial(), want);
    ASSERT_GE(m.masked_spatial(), 1u);
    ASSERT_LT(m.masked_spatial(), g.spatial());
    ASSERT_EQ(m.masked_tokens().size() + m.visible_tokens().size(), g.tokens());
  }
}

TEST(TubeMask, DeterministicAndValidated) {
  const GridShape g{8, 4, 4};
  Rng a(9), b(9);
  EXPECT_EQ(gen_tube_mask(g, {0.75, 2, 2}, a).spatial, gen_tube_mask(g, {0.75, 2, 2}, b).spatial);
  EXPECT_THROW(gen_tube_mask(g, {0.75, 5, 2}, a), ConfigError);
  EXPECT_THROW(gen_tube_mask(g, {1.0, 2, 2}, a), ConfigError);
  EXPECT_THROW(gen_tube_mask(g, {0.0, 2, 2}, a), ConfigError);
}

TEST(Attention, SingleKeyReturnsValue) {
  Rng rng(3);
  auto q = Tensor64::randn({1, 8}, rng);
  auto k = Tensor64::randn({1, 8}, rng);
  auto v = Tensor64::randn({1, 8}, rng);
  EXPECT_LT(max_abs_diff(multi_head_attention(q, k, v, 2), v), 1e-15);
}

TEST(Attention, SingleTokenBlockUsesValueProjection) {
  Rng rng(4);
  auto block = Block<double>::init(8, 2, 16, rng);
  auto x = Tensor64::randn({1, 8}, rng);
  auto h = block.ln1(x);
  auto x1 = add(x, block.wo(block.wv(h)));
  auto want = add(x1, block.fc2(gelu(block.fc1(block.ln2(x1)))));
  EXPECT_LT(max_abs_diff(block.forward(x), want), 1e-12);
}

TEST(Encoder, ToyShapes) {
  Rng rng(0);
  Encoder<float> enc(EncoderConfig::toy(), rng);
  auto clip = random_clip(EncoderConfig::toy(), rng);
  auto tokens = enc.embed(clip);
  EXPECT_EQ(tokens.shape(), (Shape{128, 128}));
  EXPECT_EQ(enc.encode(tokens).shape(), (Shape{128, 128}));
  data::FloatClip wrong{16, 32, 32, std::vector<float>(16 * 32 * 32 * 3)};
  EXPECT_THROW(enc.embed(wrong), DimensionError);
}

TEST(Encoder, DepthZeroIsIdentity) {
  Rng rng(1);
  Encoder<double> enc(tiny_encoder(0), rng);
  auto tokens = Tensor64::randn({8, 12}, rng);
  EXPECT_EQ(max_abs_diff(enc.encode(tokens), tokens), 0.0);
  const std::vector<std::size_t> vis{1, 5};
  auto sub = enc.encode(tokens, std::span<const std::size_t>(vis));
  EXPECT_EQ(sub.shape(), (Shape{2, 12}));
  EXPECT_EQ(sub.value(12), tokens.value(5 * 12));
}

TEST(Encoder, VisibleSubsetAttendsOverExactlyThoseKeys) {
  Rng rng(2);
  Encoder<float> enc(EncoderConfig::toy(), rng);
  auto tokens = enc.embed(random_clip(EncoderConfig::toy(), rng));
  auto mask = gen_tube_mask(enc.grid(), {0.75, 2, 2}, rng);
  const auto vis = mask.visible_tokens();
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  auto out = enc.encode(tokens, std::span<const std::size_t>(vis),
                        [&](std::size_t q, std::size_t k) { seen.emplace_back(q, k); });
  EXPECT_EQ(out.shape(), (Shape{vis.size(), 128}));
  ASSERT_EQ(seen.size(), 4u);  // one per block
  for (auto [q, k] : seen) {
    EXPECT_EQ(q, vis.size());
    EXPECT_EQ(k, vis.size());
  }
}

TEST(Encoder, EmptyVisibleIsProtocolError) {
  Rng rng(3);
  Encoder<double> enc(tiny_encoder(), rng);
  const std::vector<std::size_t> none;
  EXPECT_THROW(enc.encode(Tensor64::zeros({8, 12}), std::span<const std::size_t>(none)), ProtocolError);
}

TEST(Encoder, TargetPathSelectsMaskedRows) {
  Rng rng(4);
  Encoder<double> enc(tiny_encoder(), rng);
  auto tokens = Tensor64::randn({8, 12}, rng);
  const std::vector<std::size_t> masked{1, 4, 7};
  auto full = enc.encode(tokens);
  auto sel = gather_rows(full, std::span<const std::size_t>(masked));
  EXPECT_EQ(sel.shape(), (Shape{3, 12}));
  EXPECT_EQ(sel.value(2 * 12 + 3), full.value(7 * 12 + 3));
}

TEST(Encoder, ConfigValidation) {
  auto cfg = tiny_encoder();
  cfg.heads = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  PredictorConfig p{10, 1, 3, 2.0};
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Encoder, ParameterNamesAreNamespaced) {
  Rng rng(0);
  Encoder<float> enc(tiny_encoder(), rng);
  std::set<std::string> names;
  for (const auto& p : enc.parameters()) names.insert(p.name);
  EXPECT_TRUE(names.count("encoder.block0.attn.wq.weight"));
  EXPECT_TRUE(names.count("encoder.block1.mlp.fc2.bias"));
  EXPECT_TRUE(names.count("encoder.patch_embed.weight"));
  EXPECT_TRUE(names.count("encoder.norm.gain"));
  Rng r2(0);
  Predictor<float> pred({8, 1, 2, 2.0}, 12, enc.grid(), r2);
  names.clear();
  for (const auto& p : pred.parameters()) names.insert(p.name);
  EXPECT_TRUE(names.count("predictor.mask_token"));
}

class PredictorTest : public ::testing::Test {
 protected:
  Rng rng{7};
  Encoder<double> enc{tiny_encoder(), rng};
  Predictor<double> pred{{8, 2, 2, 2.0}, 12, enc.grid(), rng};
};

TEST_F(PredictorTest, OutputShapeAndCanonicalOrder) {
  const std::vector<std::size_t> ctx{0, 2, 3, 5, 6};
  auto context = Tensor64::randn({5, 12}, rng);
  const std::vector<std::size_t> masked{7, 1, 4};
  const std::vector<std::size_t> sorted{1, 4, 7};
  auto a = pred.predict(context, ctx, masked);
  auto b = pred.predict(context, ctx, sorted);
  EXPECT_EQ(a.shape(), (Shape{3, 12}));
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
}

TEST_F(PredictorTest, ContextPermutationInvariant) {
  std::vector<std::size_t> ctx{0, 2, 3, 5, 6};
  auto context = Tensor64::randn({5, 12}, rng);
  const std::vector<std::size_t> masked{1, 4, 7};
  auto base = pred.predict(context, ctx, masked);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<std::size_t> ctx_p;
  for (auto i : perm) ctx_p.push_back(ctx[i]);
  auto permuted = gather_rows(context, std::span<const std::size_t>(perm));
  EXPECT_LT(max_abs_diff(pred.predict(permuted, ctx_p, masked), base), 1e-5);
}

TEST_F(PredictorTest, Errors) {
  const std::vector<std::size_t> ctx{0, 2, 3};
  auto context = Tensor64::randn({3, 12}, rng);
  const std::vector<std::size_t> none;
  const std::vector<std::size_t> overlap{2, 4};
  const std::vector<std::size_t> dup{4, 4};
  EXPECT_THROW(pred.predict(context, ctx, none), ProtocolError);
  EXPECT_THROW(pred.predict(context, ctx, overlap), ProtocolError);
  EXPECT_THROW(pred.predict(context, ctx, dup), ProtocolError);
}

TEST(BlockGradient, FourTokenToy64Bit) {
  Rng rng(8);
  auto block = Block<double>::init(8, 2, 16, rng);
  auto x = Tensor64::randn({4, 8}, rng);
  auto r = Tensor64::randn({4, 8}, rng);
  auto params = collect_params(block, "b");
  std::vector<Tensor64> inputs{x};
  for (auto& p : params) {
    auto t = p.tensor.detach();
    for (auto& v : t.mutable_values()) v += 0.1 * rng.normal();  // non-trivial biases and gains
    inputs.push_back(t);
  }
  const double err = gradcheck_rel_error(
      [&](const std::vector<Tensor64>& in) {
        rebind_params(block, std::vector<Tensor64>(in.begin() + 1, in.end()));
        return sum(mul(block.forward(in[0]), r));
      },
      inputs);
  EXPECT_LT(err, 1e-5);
}

TEST(EncoderGradient, TwoBlockToy32BitAgainstFiniteDifferences) {
  // Analytic gradients from the float model, central differences from an
  // exact double copy.
  Rng rng(9);
  Encoder<float> enc(tiny_encoder(2), rng);
  auto clip = random_clip(tiny_encoder(2), rng);
  auto weights = Tensor64::randn({8, 12}, rng);
  auto wf = weights.cast<float>();
  enc.set_requires_grad(true);
  backward(sum(mul(enc.forward(clip), wf)));
  std::vector<std::vector<double>> analytic;
  std::vector<Tensor64> inputs;
  for (const auto& p : enc.parameters()) {
    analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    inputs.push_back(p.tensor.cast<double>());
  }
  auto enc64 = convert_encoder<double>(enc);
  const auto numeric = numeric_gradient(
      [&](const std::vector<Tensor64>& in) {
        rebind_params(enc64, in);
        return sum(mul(enc64.forward(clip), weights));
      },
      inputs);
  EXPECT_LT(relative_error(analytic, numeric), 1e-3);
}

TEST(Convert, FloatToDoubleRoundTrip) {
  Rng rng(10);
  Encoder<float> enc(tiny_encoder(), rng);
  auto clip = random_clip(tiny_encoder(), rng);
  auto back = convert_encoder<float>(convert_encoder<double>(enc));
  EXPECT_EQ(max_abs_diff(back.forward(clip), enc.forward(clip)), 0.0);
}
