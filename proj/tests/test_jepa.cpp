#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include <unistd.h>

#include "jepa_fer/data/synth.hpp"
#include "jepa_fer/error.hpp"
#include "jepa_fer/jepa/jepa.hpp"
#include "jepa_fer/ops.hpp"

using namespace jepa_fer;
using namespace jepa_fer::jepa;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.encoder.frames = 16;
  cfg.encoder.height = 16;
  cfg.encoder.width = 16;
  cfg.encoder.tubelet = {2, 8, 8};
  cfg.encoder.embed_dim = 12;
  cfg.encoder.depth = 2;
  cfg.encoder.heads = 2;
  cfg.encoder.mlp_ratio = 2.0;
  cfg.predictor = {8, 1, 2, 2.0};
  return cfg;
}

data::FloatClip random_clip(const vit::EncoderConfig& cfg, Rng& rng) {
  data::FloatClip clip{cfg.frames, cfg.height, cfg.width, {}};
  clip.data.resize(cfg.frames * cfg.height * cfg.width * 3);
  for (auto& x : clip.data) x = static_cast<float>(rng.normal());
  return clip;
}

bool any_nonzero(std::span<const float> g) {
  for (float x : g)
    if (x != 0.0f) return true;
  return false;
}

}  // namespace

TEST(EmaSchedule, EndpointsAndMonotone) {
  EmaSchedule s{0.998, 1.0, 200};
  EXPECT_EQ(s.momentum(0), 0.998);
  EXPECT_EQ(s.momentum(199), 1.0);
  for (std::size_t i = 1; i < 200; ++i) EXPECT_GE(s.momentum(i), s.momentum(i - 1));
  EXPECT_THROW((EmaSchedule{0.9, 0.8, 10}.validate()), ConfigError);
}

TEST(EmaUpdate, FixedPointsAndArithmetic) {
  auto t = Tensor::from_values({2}, {1.0f, 1.0f});
  auto o = Tensor::from_values({2}, {0.0f, 0.5f});
  vit::ParamList<float> tl{{"t", t, true}}, ol{{"o", o, true}};
  ema_update(tl, ol, 1.0);
  EXPECT_EQ(t.value(0), 1.0f);
  EXPECT_EQ(t.value(1), 1.0f);
  ema_update(tl, ol, 0.99);
  EXPECT_FLOAT_EQ(t.value(0), 0.99f);
  ema_update(tl, ol, 0.0);
  EXPECT_EQ(t.value(0), 0.0f);
  EXPECT_EQ(t.value(1), 0.5f);
}

TEST(EmaUpdate, Errors) {
  vit::ParamList<float> a{{"a", Tensor::zeros({2}), true}}, b{{"b", Tensor::zeros({3}), true}};
  EXPECT_THROW(ema_update(a, b, 0.5), DimensionError);
  EXPECT_THROW(ema_update(a, a, 1.5), ConfigError);
}

TEST(EmaUpdate, ContractionReachesToleranceAtPredictedStep) {
  for (double m : {0.9, 0.99, 0.998}) {
    auto t = Tensor::from_values({3}, {0.75f, -0.5f, 0.25f});
    auto o = Tensor::zeros({3});
    vit::ParamList<float> tl{{"t", t, true}}, ol{{"o", o, true}};
    const double gap0 = 0.75;
    const auto predicted = static_cast<std::size_t>(std::ceil(std::log(1e-6 / gap0) / std::log(m)));
    std::size_t steps = 0;
    auto gap = [&] {
      double g = 0;
      for (std::size_t i = 0; i < 3; ++i) g = std::max(g, std::abs(double(t.value(i)) - double(o.value(i))));
      return g;
    };
    while (gap() >= 1e-6) {
      ema_update(tl, ol, m);
      ++steps;
      ASSERT_LT(steps, predicted + 10);
    }
    EXPECT_LE(steps, predicted + 1) << "m=" << m;
    EXPECT_GE(steps + 1, predicted) << "m=" << m;
  }
}

TEST(JepaModel, TargetStartsAsCopyAndNeverRequiresGrad) {
  JepaModel model(small_model(), 3);
  const auto on = model.online().parameters();
  const auto tg = model.target().parameters();
  ASSERT_EQ(on.size(), tg.size());
  for (std::size_t i = 0; i < on.size(); ++i) {
    EXPECT_EQ(on[i].tensor.shape(), tg[i].tensor.shape());
    EXPECT_TRUE(std::equal(on[i].tensor.values().begin(), on[i].tensor.values().end(),
                           tg[i].tensor.values().begin()));
    EXPECT_NE(on[i].tensor.impl(), tg[i].tensor.impl());
    EXPECT_FALSE(tg[i].tensor.requires_grad());
    EXPECT_TRUE(on[i].tensor.requires_grad());
  }
}

TEST(JepaLoss, StopGradientIsStructural) {
  JepaModel model(small_model(), 4);
  Rng rng(1);
  auto clip = random_clip(model.online().config(), rng);
  auto mask = vit::gen_tube_mask(model.online().grid(), {0.5, 1, 1}, rng);
  auto loss = jepa_loss(model, clip, mask);
  std::set<const detail::TensorImpl<float>*> leaves;
  for (auto* l : Tape::record(loss).leaves()) leaves.insert(l);
  for (const auto& p : model.target().parameters()) EXPECT_FALSE(leaves.count(p.tensor.impl().get())) << p.name;
  backward(loss);
  for (const auto& p : model.target().parameters()) EXPECT_FALSE(p.tensor.has_grad()) << p.name;
  bool online_moved = false, predictor_moved = false;
  for (const auto& p : model.online().parameters()) online_moved |= p.tensor.has_grad() && any_nonzero(p.tensor.grad());
  for (const auto& p : model.predictor().parameters())
    predictor_moved |= p.tensor.has_grad() && any_nonzero(p.tensor.grad());
  EXPECT_TRUE(online_moved);
  EXPECT_TRUE(predictor_moved);
}

TEST(JepaLoss, BitReproducible) {
  auto run = [] {
    JepaModel model(small_model(), 5);
    Rng rng(2);
    auto clip = random_clip(model.online().config(), rng);
    auto mask = vit::gen_tube_mask(model.online().grid(), {0.5, 1, 1}, rng);
    return jepa_loss(model, clip, mask).item();
  };
  const float a = run();
  EXPECT_EQ(a, run());
  EXPECT_GT(a, 0.0f);
}

TEST(JepaLoss, PerfectPredictionGivesZero) {
  JepaModel model(small_model(), 6);
  Rng rng(3);
  auto clip = random_clip(model.online().config(), rng);
  auto mask = vit::gen_tube_mask(model.online().grid(), {0.5, 1, 1}, rng);
  const auto masked = mask.masked_tokens();
  auto target = gather_rows(model.target().forward(clip), std::span<const std::size_t>(masked));
  EXPECT_EQ(l1_loss(target, target.detach()).item(), 0.0f);
}

TEST(JepaLoss, DegenerateMasksRejected) {
  JepaModel model(small_model(), 7);
  Rng rng(4);
  auto clip = random_clip(model.online().config(), rng);
  vit::TubeMask all{model.online().grid(), std::vector<std::uint8_t>(4, 1)};
  vit::TubeMask none{model.online().grid(), std::vector<std::uint8_t>(4, 0)};
  EXPECT_THROW(jepa_loss(model, clip, all), ProtocolError);
  EXPECT_THROW(jepa_loss(model, clip, none), ProtocolError);
}

TEST(JepaModel, CheckpointRoundTripGivesIdenticalLoss) {
  JepaModel model(small_model(), 8);
  // Make the target differ from the online encoder first.
  for (auto& p : model.online().parameters())
    for (auto& v : Tensor(p.tensor).mutable_values()) v *= 1.01f;
  auto back = JepaModel::from_checkpoint(Checkpoint::deserialize(model.to_checkpoint().serialize()));
  EXPECT_EQ(back.to_checkpoint().checksum(), model.to_checkpoint().checksum());
  Rng r1(5), r2(5);
  auto c1 = random_clip(model.online().config(), r1);
  auto m1 = vit::gen_tube_mask(model.online().grid(), {0.5, 1, 1}, r1);
  EXPECT_EQ(jepa_loss(model, c1, m1).item(), jepa_loss(back, c1, m1).item());
  for (const auto& p : back.target().parameters()) EXPECT_FALSE(p.tensor.requires_grad());
}

TEST(TokenVariance, ZeroForCollapsedTokens) {
  EXPECT_EQ(token_variance(Tensor::full({5, 3}, 2.0f)), 0.0);
  EXPECT_NEAR(token_variance(Tensor::from_values({2, 1}, {0.f, 2.f})), 1.0, 1e-12);
}

TEST(ScheduledLr, WarmupThenConstant) {
  PretrainConfig cfg;
  cfg.steps = 100;
  cfg.lr = 1e-3;
  cfg.warmup_fraction = 0.1;
  EXPECT_NEAR(scheduled_lr(cfg, 0), 1e-4, 1e-15);
  EXPECT_NEAR(scheduled_lr(cfg, 9), 1e-3, 1e-15);
  EXPECT_EQ(scheduled_lr(cfg, 50), 1e-3);
}

class PretrainSmall : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / ("jepa_fer_pre_" + std::to_string(::getpid())));
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    data::SynthConfig cfg;
    cfg.subjects = 5;
    cfg.videos_per_subject_class = 1;
    cfg.height = 16;
    cfg.width = 16;
    cfg.seed = 3;
    manifest_ = new data::Manifest(data::gen_synthetic(cfg, *dir_));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete manifest_;
    delete dir_;
  }

  static PretrainConfig config() {
    PretrainConfig cfg;
    cfg.steps = 6;
    cfg.batch_size = 2;
    cfg.lr = 1e-3;
    cfg.mask = {0.5, 1, 1};
    cfg.seed = 11;
    cfg.augment.target_height = 16;
    cfg.augment.target_width = 16;
    return cfg;
  }

  static fs::path* dir_;
  static data::Manifest* manifest_;
};

fs::path* PretrainSmall::dir_ = nullptr;
data::Manifest* PretrainSmall::manifest_ = nullptr;

TEST_F(PretrainSmall, LogsScheduleAndIsDeterministic) {
  auto run = [&] {
    JepaModel model(small_model(), 1);
    data::VideoStore store(*manifest_);
    auto res = pretrain_run(model, *manifest_, store, config());
    return std::pair{res.log, model.to_checkpoint().checksum()};
  };
  const auto [log, sum1] = run();
  ASSERT_EQ(log.size(), 6u);
  EXPECT_EQ(log.front().momentum, 0.998);
  EXPECT_EQ(log.back().momentum, 1.0);
  for (const auto& e : log) EXPECT_TRUE(std::isfinite(e.loss));
  const auto [log2, sum2] = run();
  EXPECT_EQ(sum1, sum2);
  for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(log[i].loss, log2[i].loss);
  const auto csv = loss_log_csv(log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,loss,momentum");
}

TEST_F(PretrainSmall, TargetMovesOnlyThroughEma) {
  JepaModel model(small_model(), 2);
  const auto before = model.target().parameters().front().tensor.detach();
  data::VideoStore store(*manifest_);
  auto cfg = config();
  cfg.ema_start = cfg.ema_end = 1.0;  // m = 1 freezes the target
  pretrain_run(model, *manifest_, store, cfg);
  const auto after = model.target().parameters().front().tensor;
  EXPECT_TRUE(std::equal(before.values().begin(), before.values().end(), after.values().begin()));
  for (const auto& p : model.target().parameters()) EXPECT_FALSE(p.tensor.has_grad());
}

TEST_F(PretrainSmall, CheckpointResumeGivesSameNextLoss) {
  JepaModel model(small_model(), 3);
  data::VideoStore store(*manifest_);
  auto cfg = config();
  pretrain_run(model, *manifest_, store, cfg);
  auto restored = JepaModel::from_checkpoint(Checkpoint::deserialize(model.to_checkpoint().serialize()));
  cfg.steps = 1;
  const auto a = pretrain_run(model, *manifest_, store, cfg).log.front().loss;
  const auto b = pretrain_run(restored, *manifest_, store, cfg).log.front().loss;
  EXPECT_EQ(a, b);
}

TEST_F(PretrainSmall, NonFiniteLossAborts) {
  JepaModel model(small_model(), 4);
  for (auto& v : Tensor(model.predictor().parameters().back().tensor).mutable_values())
    v = std::numeric_limits<float>::quiet_NaN();
  data::VideoStore store(*manifest_);
  try {
    pretrain_run(model, *manifest_, store, config());
    FAIL();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("lr="), std::string::npos) << msg;
  }
}

TEST_F(PretrainSmall, ClipSizeMustMatchEncoder) {
  JepaModel model(small_model(), 5);
  data::VideoStore store(*manifest_);
  auto cfg = config();
  cfg.augment.target_height = 32;
  EXPECT_THROW(pretrain_run(model, *manifest_, store, cfg), ConfigError);
}
