#include "jepa_fer/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "jepa_fer/error.hpp"

namespace jepa_fer::data {

void SynthConfig::validate() const {
  const auto labels = label_set();
  if (labels.size() < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (subjects < folds) {
    throw ConfigError("synthetic data needs at least as many subjects (" + std::to_string(subjects) +
                      ") as folds (" + std::to_string(folds) + ")");
  }
  if (videos_per_subject_class == 0) throw ConfigError("videos_per_subject_class must be positive");
  if (min_frames == 0 || min_frames > max_frames) throw ConfigError("need 0 < min_frames <= max_frames");
  if (height < 8 || width < 8) throw ConfigError("synthetic frames must be at least 8x8");
}

LabelSet SynthConfig::label_set() const { return LabelSet::for_dataset(like, classes); }

namespace {

std::string subject_name(DatasetTag like, std::size_t i) {
  char buf[32];
  switch (like) {
    case DatasetTag::CremaD:
      std::snprintf(buf, sizeof buf, "%zu", 1001 + i);
      break;
    case DatasetTag::Ravdess:
      std::snprintf(buf, sizeof buf, "%02zu", i + 1);
      break;
    case DatasetTag::Synth:
      std::snprintf(buf, sizeof buf, "s%02zu", i);
      break;
  }
  return buf;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

VideoTensor render_synthetic_video(const SynthConfig& cfg, std::size_t pattern,
                                   std::size_t pattern_count, std::size_t subject_index,
                                   std::size_t frames, Rng& rng) {
  const std::size_t h = cfg.height, w = cfg.width;
  auto video = VideoTensor::blank(frames, h, w, 3);

  // Subject appearance: fixed per (seed, subject).
  auto subject_rng = Rng::derive(cfg.seed ^ 0x5u, 1000 + subject_index);
  const double bg = 40.0 + 40.0 * subject_rng.uniform();
  const double tex_amp = 10.0 + 10.0 * subject_rng.uniform();
  const double tex_freq = 2.0 + 4.0 * subject_rng.uniform();
  const double tex_angle = std::numbers::pi * subject_rng.uniform();
  const double tex_phase = 2.0 * std::numbers::pi * subject_rng.uniform();
  std::array<double, 3> tint{};
  for (auto& t : tint) t = 0.8 + 0.2 * subject_rng.uniform();

  // Class dynamics.
  const double axis = std::numbers::pi * static_cast<double>(pattern) / static_cast<double>(pattern_count);
  const double freq_hz = 0.5 + 0.35 * static_cast<double>(pattern % 3);
  const double amplitude = 0.28 * static_cast<double>(std::min(h, w));
  const double radius = 0.12 * static_cast<double>(std::min(h, w));

  // Per-video variation.
  const double phase = 2.0 * std::numbers::pi * rng.uniform();
  const double jitter_y = rng.uniform(-0.04, 0.04) * static_cast<double>(h);
  const double jitter_x = rng.uniform(-0.04, 0.04) * static_cast<double>(w);
  const double noise = 6.0;

  const double cy = 0.5 * static_cast<double>(h) + jitter_y;
  const double cx = 0.5 * static_cast<double>(w) + jitter_x;
  const double dir_y = std::sin(axis), dir_x = std::cos(axis);
  const double ty = std::sin(tex_angle), tx = std::cos(tex_angle);
  const double inv_two_r2 = 1.0 / (2.0 * radius * radius);

  for (std::size_t t = 0; t < frames; ++t) {
    const double time = static_cast<double>(t) / video.frame_rate;
    const double offset = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * time + phase);
    const double by = cy + offset * dir_y;
    const double bx = cx + offset * dir_x;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double fy = static_cast<double>(y), fx = static_cast<double>(x);
        const double texture = tex_amp * std::sin(2.0 * std::numbers::pi * tex_freq *
                                                      (fy * ty + fx * tx) / static_cast<double>(w) +
                                                  tex_phase);
        const double d2 = (fy - by) * (fy - by) + (fx - bx) * (fx - bx);
        const double blob = 170.0 * std::exp(-d2 * inv_two_r2);
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = (bg + texture + blob) * tint[c] + noise * rng.normal();
          video.data[((t * h + y) * w + x) * 3 + c] = to_byte(v);
        }
      }
    }
  }
  return video;
}

Manifest gen_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (!std::filesystem::is_directory(out_dir)) {
    throw IoError("output directory " + out_dir.string() + " does not exist");
  }
  const auto labels = cfg.label_set();
  const auto pattern_labels = cfg.like == DatasetTag::Synth ? labels : LabelSet::ravdess();

  Manifest manifest;
  manifest.root = out_dir;
  manifest.synth_classes = cfg.like == DatasetTag::Synth ? labels.size() : 0;
  std::vector<std::filesystem::path> written;
  const auto videos_dir = out_dir / "videos";
  const bool created_dir = !std::filesystem::exists(videos_dir);
  try {
    std::filesystem::create_directories(videos_dir);
    auto rng = Rng::derive(cfg.seed, 0);
    for (std::size_t s = 0; s < cfg.subjects; ++s) {
      const auto subject = subject_name(cfg.like, s);
      for (std::size_t c = 0; c < labels.size(); ++c) {
        const auto pattern = pattern_labels.index_of(labels.name(c));
        for (std::size_t v = 0; v < cfg.videos_per_subject_class; ++v) {
          const std::size_t frames =
              cfg.min_frames + static_cast<std::size_t>(rng.below(cfg.max_frames - cfg.min_frames + 1));
          auto video_rng = Rng::derive(cfg.seed, rng.next_u64());
          auto video = render_synthetic_video(cfg, pattern, pattern_labels.size(), s, frames, video_rng);
          VideoRecord r;
          r.id = subject + "_" + labels.name(c) + "_" + std::to_string(v);
          r.path = "videos/" + r.id + ".rvt";
          r.subject_id = subject;
          r.label = labels.name(c);
          r.dataset = cfg.like;
          r.duration_frames = frames;
          const auto path = out_dir / r.path;
          save_video(path, video);
          written.push_back(path);
          manifest.records.push_back(std::move(r));
        }
      }
    }
    const auto manifest_path = out_dir / "manifest.csv";
    manifest.save_csv(manifest_path);
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
    if (created_dir) std::filesystem::remove(videos_dir, ec);
    throw;
  }
  return manifest;
}

}  // namespace jepa_fer::data
