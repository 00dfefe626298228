#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "jepa_fer/data/manifest.hpp"
#include "jepa_fer/data/video.hpp"
#include "jepa_fer/rng.hpp"

namespace jepa_fer::data {

struct SynthConfig {
  std::size_t classes = 3;  // ignored for RAVDESS/CREMAD shapes (8 / 6)
  std::size_t subjects = 10;
  std::size_t videos_per_subject_class = 2;
  std::size_t min_frames = 61;
  std::size_t max_frames = 72;
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 0;
  /// SYNTH, or synthetic stand-ins labelled like RAVDESS / CREMA-D. Class
  /// appearance is keyed by class name, so "anger" looks alike in both.
  DatasetTag like = DatasetTag::Synth;
  std::size_t folds = 5;

  void validate() const;
  LabelSet label_set() const;
};

/// Renders one video: a bright blob oscillating along a class-specific axis
/// at a class-specific frequency, over a subject-specific background texture
/// and tint, plus per-video noise and phase.
VideoTensor render_synthetic_video(const SynthConfig& cfg, std::size_t pattern,
                                   std::size_t pattern_count, std::size_t subject_index,
                                   std::size_t frames, Rng& rng);

/// Writes videos/<id>.rvt and manifest.csv into `out_dir` (which must
/// exist). Deterministic in cfg.seed. On failure, files written so far are
/// removed.
Manifest gen_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace jepa_fer::data
