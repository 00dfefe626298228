#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include <unistd.h>

#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/data/folds.hpp"
#include "jepa_fer/data/labels.hpp"
#include "jepa_fer/data/manifest.hpp"
#include "jepa_fer/data/store.hpp"
#include "jepa_fer/data/synth.hpp"
#include "jepa_fer/data/video.hpp"
#include "jepa_fer/error.hpp"
#include "jepa_fer/io.hpp"

using namespace jepa_fer;
using namespace jepa_fer::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("jepa_fer_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Frame t is filled with value t (mod 256) so indices can be read back.
VideoTensor counting_video(std::size_t frames, std::size_t h = 4, std::size_t w = 4) {
  auto v = VideoTensor::blank(frames, h, w);
  for (std::size_t t = 0; t < frames; ++t) std::fill_n(v.frame(t), v.frame_size(), static_cast<std::uint8_t>(t % 256));
  return v;
}

std::string read_bytes(const fs::path& p) { return io::read_file(p); }

}  // namespace

TEST(Rvt1, RoundTrip) {
  Rng rng(1);
  auto v = VideoTensor::blank(5, 7, 3);
  for (auto& b : v.data) b = static_cast<std::uint8_t>(rng.below(256));
  const auto dir = temp_dir("rvt");
  save_video(dir / "v.rvt", v);
  EXPECT_EQ(load_video(dir / "v.rvt"), v);
  fs::remove_all(dir);
}

TEST(Rvt1, MinimalVideo) {
  auto v = VideoTensor::blank(1, 1, 1);
  v.data = {1, 2, 3};
  EXPECT_EQ(decode_rvt1(encode_rvt1(v)), v);
}

TEST(Rvt1, TruncatedPayloadReportsOffset) {
  auto bytes = encode_rvt1(VideoTensor::blank(61, 64, 64));
  bytes.resize(bytes.size() - 10);
  try {
    decode_rvt1(bytes);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("truncated"), std::string::npos) << msg;
    EXPECT_NE(msg.find("20"), std::string::npos) << msg;  // payload starts after the 20-byte header
  }
}

TEST(Rvt1, BadMagic) { EXPECT_THROW(decode_rvt1("RVT2\0\0\0\0"), FormatError); }

TEST(PadVideo, ShortVideoRepeatsLastFrame) {
  auto v = counting_video(30);
  auto p = pad_video(v, 61);
  ASSERT_EQ(p.frames, 61u);
  for (std::size_t t = 0; t < 30; ++t) EXPECT_TRUE(std::equal(p.frame(t), p.frame(t) + p.frame_size(), v.frame(t)));
  for (std::size_t t = 30; t < 61; ++t)
    EXPECT_TRUE(std::equal(p.frame(t), p.frame(t) + p.frame_size(), v.frame(29))) << t;
}

TEST(PadVideo, LongEnoughUnchanged) {
  EXPECT_EQ(pad_video(counting_video(61), 61), counting_video(61));
  EXPECT_EQ(pad_video(counting_video(100), 61), counting_video(100));
}

TEST(EnumerateClips, SpanArithmetic) {
  EXPECT_EQ(clip_span(), 61u);
  EXPECT_EQ(enumerate_clips(61), (std::vector<std::size_t>{0}));
  EXPECT_EQ(enumerate_clips(64), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(enumerate_clips(30), (std::vector<std::size_t>{0}));
  for (std::size_t d = 61; d < 400; ++d) EXPECT_EQ(enumerate_clips(d).size(), d - 60);
  EXPECT_EQ(enumerate_clips(70, 16, 4, 4), (std::vector<std::size_t>{0, 4, 8}));
}

TEST(SampleTrainingClips, OneValidStartRepeats) {
  Rng rng(0);
  EXPECT_EQ(sample_training_clips(61, 8, rng), std::vector<std::size_t>(8, 0));
}

TEST(SampleTrainingClips, DistinctAndDeterministic) {
  Rng a(42), b(42);
  auto s = sample_training_clips(1000, 8, a);
  EXPECT_EQ(s, sample_training_clips(1000, 8, b));
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 8u);
  for (auto x : s) EXPECT_LE(x + 61, 1000u);
  // Golden draw for seed 42 with this generator.
  EXPECT_EQ(s, (std::vector<std::size_t>{106, 165, 910, 532, 153, 768, 876, 865}));
}

TEST(SampleTrainingClips, ZeroIsConfigError) {
  Rng rng(0);
  EXPECT_THROW(sample_training_clips(100, 0, rng), ConfigError);
}

TEST(ExtractAndTransform, FrameIndicesFollowSkip) {
  auto v = pad_video(counting_video(90, 8, 8), 61);
  const ClipSpec spec{"v", 7};
  AugmentConfig cfg;
  cfg.target_height = 8;
  cfg.target_width = 8;
  cfg.channel_mean = {0, 0, 0};
  cfg.channel_std = {1, 1, 1};
  Rng rng(0);
  auto clip = extract_and_transform(v, spec, cfg, rng);
  ASSERT_EQ(clip.frames, 16u);
  const auto idx = spec.frame_indices();
  for (std::size_t j = 0; j < 16; ++j) {
    EXPECT_EQ(idx[j], 7 + 4 * j);
    EXPECT_FLOAT_EQ(clip.at(j, 3, 3, 0), static_cast<float>(7 + 4 * j) / 255.0f);
  }
}

TEST(ExtractAndTransform, ConstantVideoNormalizes) {
  auto v = VideoTensor::blank(61, 16, 16);
  std::fill(v.data.begin(), v.data.end(), 128);
  AugmentConfig cfg = AugmentConfig::toy(false);
  cfg.channel_mean = {0.5f, 0.5f, 0.5f};
  cfg.channel_std = {0.25f, 0.25f, 0.25f};
  Rng rng(0);
  auto clip = extract_and_transform(v, ClipSpec{"v", 0}, cfg, rng);
  EXPECT_EQ(clip.height, 64u);
  for (float x : clip.data) EXPECT_NEAR(x, (128.0 / 255.0 - 0.5) / 0.25, 1e-5);
}

TEST(ExtractAndTransform, EvalModeDeterministic) {
  Rng g(3);
  auto v = VideoTensor::blank(61, 20, 30);
  for (auto& b : v.data) b = static_cast<std::uint8_t>(g.below(256));
  Rng r1(1), r2(99);
  auto a = extract_and_transform(v, ClipSpec{"v", 0}, AugmentConfig::toy(false), r1);
  auto b = extract_and_transform(v, ClipSpec{"v", 0}, AugmentConfig::toy(false), r2);
  EXPECT_EQ(a.data, b.data);
  auto box = center_crop(20, 30);
  EXPECT_EQ(box.height, 20u);
  EXPECT_EQ(box.width, 20u);
  EXPECT_EQ(box.left, 5u);
}

TEST(ExtractAndTransform, TrainCropsStayInBounds) {
  const auto cfg = AugmentConfig::toy(true);
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t h = 20 + rng.below(100), w = 20 + rng.below(100);
    auto box = sample_crop(h, w, cfg, rng);
    ASSERT_GT(box.height, 0u);
    ASSERT_GT(box.width, 0u);
    ASSERT_LE(box.top + box.height, h);
    ASSERT_LE(box.left + box.width, w);
  }
}

TEST(ExtractAndTransform, OutOfRangeClipIsProtocolError) {
  auto v = counting_video(61);
  Rng rng(0);
  EXPECT_THROW(extract_and_transform(v, ClipSpec{"v", 1}, AugmentConfig::toy(false), rng), ProtocolError);
}

TEST(AugmentConfig, Validation) {
  auto cfg = AugmentConfig::toy();
  cfg.scale_min = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = AugmentConfig::toy();
  cfg.channel_std[1] = 0.0f;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(LabelSets, CanonicalOrder) {
  EXPECT_EQ(LabelSet::ravdess().names(), (std::vector<std::string>{"anger", "calm", "disgust", "fear", "happy",
                                                                    "neutral", "sad", "surprise"}));
  EXPECT_EQ(LabelSet::crema_d().names(),
            (std::vector<std::string>{"anger", "disgust", "fear", "happy", "neutral", "sad"}));
  // CREMA-D == RAVDESS minus calm and surprise.
  std::vector<std::string> r = LabelSet::ravdess().names();
  std::erase(r, "calm");
  std::erase(r, "surprise");
  EXPECT_EQ(r, LabelSet::crema_d().names());
  EXPECT_THROW(LabelSet::crema_d().index_of("calm"), ProtocolError);
}

TEST(Manifest, CsvRoundTripAndValidation) {
  const auto dir = temp_dir("manifest");
  Manifest m;
  m.records.push_back({"a", "videos/a.rvt", "s1", "c0", DatasetTag::Synth, 61});
  m.records.push_back({"b", "videos/b.rvt", "s2", "c1", DatasetTag::Synth, 70});
  m.save_csv(dir / "manifest.csv");
  auto back = Manifest::load_csv(dir / "manifest.csv");
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[1].duration_frames, 70u);
  EXPECT_EQ(back.resolve(back.records[0]), dir / "videos/a.rvt");
  EXPECT_EQ(back.to_csv(), m.to_csv());

  io::atomic_write(dir / "bad.csv", "id,path,subject_id,label,dataset,duration_frames\na,p,s,c0,SYNTH\n");
  EXPECT_THROW(Manifest::load_csv(dir / "bad.csv"), FormatError);
  io::atomic_write(dir / "bad2.csv", "id,path,subject_id,label,dataset,duration_frames\na,p,s,calm,CREMAD,61\n");
  EXPECT_THROW(Manifest::load_csv(dir / "bad2.csv"), FormatError);
  fs::remove_all(dir);
}

TEST(VideoStore, DurationMismatchIsFormatError) {
  const auto dir = temp_dir("store");
  save_video(dir / "a.rvt", counting_video(30));
  Manifest m;
  m.root = dir;
  m.records.push_back({"a", "a.rvt", "s1", "c0", DatasetTag::Synth, 30});
  m.records.push_back({"b", "a.rvt", "s1", "c0", DatasetTag::Synth, 31});
  VideoStore store(m);
  EXPECT_EQ(store.get(m.records[0]).frames, 61u);  // padded to one span
  EXPECT_THROW(store.get(m.records[1]), FormatError);
  const VideoStore& cstore = store;
  EXPECT_THROW(cstore.get(m.records[1]), UsageError);
  fs::remove_all(dir);
}

class SynthSet : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(temp_dir("synth"));
    SynthConfig cfg;
    cfg.seed = 7;
    manifest_ = new Manifest(gen_synthetic(cfg, *dir_));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete manifest_;
    delete dir_;
  }
  static fs::path* dir_;
  static Manifest* manifest_;
};

fs::path* SynthSet::dir_ = nullptr;
Manifest* SynthSet::manifest_ = nullptr;

TEST_F(SynthSet, DefaultCountsBalanced) {
  ASSERT_EQ(manifest_->records.size(), 60u);
  std::map<std::string, int> per_label;
  for (const auto& r : manifest_->records) per_label[r.label]++;
  EXPECT_EQ(per_label.size(), 3u);
  for (const auto& [label, n] : per_label) EXPECT_EQ(n, 20) << label;
  EXPECT_EQ(manifest_->subjects().size(), 10u);
}

TEST_F(SynthSet, SameSeedByteIdentical) {
  const auto other = temp_dir("synth_again");
  SynthConfig cfg;
  cfg.seed = 7;
  gen_synthetic(cfg, other);
  EXPECT_EQ(read_bytes(other / "manifest.csv"), read_bytes(*dir_ / "manifest.csv"));
  for (const auto& r : manifest_->records)
    ASSERT_EQ(read_bytes(other / r.path), read_bytes(*dir_ / r.path)) << r.id;
  fs::remove_all(other);
}

TEST_F(SynthSet, NearestCentroidSeparatesClasses) {
  // Per-video feature: the temporal mean frame. Class centroids over all
  // videos; each video goes to the closest centroid.
  const auto labels = manifest_->label_set();
  std::vector<std::vector<double>> features;
  std::vector<std::size_t> truth;
  for (const auto& r : manifest_->records) {
    const auto v = load_video(manifest_->resolve(r));
    std::vector<double> f(v.frame_size(), 0.0);
    for (std::size_t t = 0; t < v.frames; ++t)
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += v.frame(t)[i];
    for (auto& x : f) x /= static_cast<double>(v.frames);
    features.push_back(std::move(f));
    truth.push_back(labels.index_of(r.label));
  }
  const std::size_t d = features[0].size();
  std::vector<std::vector<double>> centroid(labels.size(), std::vector<double>(d, 0.0));
  std::vector<double> count(labels.size(), 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    count[truth[i]] += 1;
    for (std::size_t j = 0; j < d; ++j) centroid[truth[i]][j] += features[i][j];
  }
  for (std::size_t c = 0; c < labels.size(); ++c)
    for (auto& x : centroid[c]) x /= count[c];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < labels.size(); ++c) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += (features[i][j] - centroid[c][j]) * (features[i][j] - centroid[c][j]);
      if (s < best_d) best_d = s, best = c;
    }
    correct += best == truth[i];
  }
  EXPECT_GT(static_cast<double>(correct) / features.size(), 0.9);
}

TEST_F(SynthSet, GeneratedFoldsVerify) {
  auto plan = make_folds(*manifest_, 5, FoldSource::Generated, 3);
  EXPECT_TRUE(verify_folds(plan, *manifest_).passed);
  for (auto s : plan.sizes()) EXPECT_EQ(s, 2u);
  auto split = split_fold(*manifest_, plan, 0);
  EXPECT_EQ(split.validation.size(), 12u);
  EXPECT_EQ(split.train.size(), 48u);
  for (const auto* r : split.train) EXPECT_EQ(plan.fold_of(r->subject_id) == 0, false);
}

TEST(SynthConfig, Validation) {
  SynthConfig cfg;
  cfg.classes = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.subjects = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SynthGenerate, MissingOutputDirLeavesNothing) {
  const auto dir = fs::temp_directory_path() / "jepa_fer_definitely_missing_dir";
  fs::remove_all(dir);
  EXPECT_THROW(gen_synthetic(SynthConfig{}, dir), IoError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Folds, CremaTablePlan) {
  const auto plan = crema_d_table_plan();
  EXPECT_EQ(plan.sizes(), (std::vector<std::size_t>{19, 18, 18, 18, 18}));
  std::set<std::string> all;
  for (const auto& f : plan.folds) all.insert(f.begin(), f.end());
  EXPECT_EQ(all.size(), 91u);
  EXPECT_EQ(plan.fold_of("1002"), 0u);
  std::size_t hits = 0;
  for (const auto& f : plan.folds) hits += std::count(f.begin(), f.end(), "1002");
  EXPECT_EQ(hits, 1u);
  EXPECT_TRUE(verify_folds(plan, crema_d_subjects()).passed);
}

TEST(Folds, TableSourceOnlyForCrema) {
  Manifest m;
  m.records.push_back({"a", "a", "s1", "c0", DatasetTag::Synth, 61});
  EXPECT_THROW(make_folds(m, 5, FoldSource::Table), ProtocolError);
}

TEST(Folds, GeneratedBalancesCounts) {
  Manifest m;
  for (int s = 0; s < 24; ++s) m.records.push_back({"v" + std::to_string(s), "x", "s" + std::to_string(s), "c0",
                                                    DatasetTag::Synth, 61});
  auto plan = make_folds(m, 5, FoldSource::Generated, 1);
  auto sizes = plan.sizes();
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 5, 5, 5, 5}));
  EXPECT_TRUE(verify_folds(plan, m).passed);
  // Any seed, any k: the plan verifies on its own manifest.
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (std::size_t k = 2; k <= 6; ++k) EXPECT_TRUE(verify_folds(make_folds(m, k, FoldSource::Generated, seed), m).passed);
}

TEST(Folds, DuplicateAndMissingSubjectsFail) {
  auto plan = crema_d_table_plan();
  plan.folds[1].push_back("1002");
  auto rep = verify_folds(plan, crema_d_subjects());
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.duplicated, (std::vector<std::string>{"1002"}));

  plan = crema_d_table_plan();
  std::erase(plan.folds[2], plan.folds[2].front());
  rep = verify_folds(plan, crema_d_subjects());
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.missing.size(), 1u);
}

TEST(Folds, JsonRoundTrip) {
  auto plan = crema_d_table_plan();
  auto back = FoldPlan::from_json(plan.to_json());
  EXPECT_EQ(back.folds, plan.folds);
  EXPECT_EQ(back.source, FoldSource::Table);
  EXPECT_THROW(FoldPlan::from_json("{\"k\": 2}"), FormatError);
}
