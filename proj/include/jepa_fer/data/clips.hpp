#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "jepa_fer/data/video.hpp"
#include "jepa_fer/rng.hpp"

namespace jepa_fer::data {

inline constexpr std::size_t kClipLength = 16;
inline constexpr std::size_t kFrameSkip = 4;

/// Frames covered by one clip: skip * (length - 1) + 1 (61 for 16 x 4).
constexpr std::size_t clip_span(std::size_t length = kClipLength, std::size_t skip = kFrameSkip) {
  return skip * (length - 1) + 1;
}

struct ClipSpec {
  std::string record_id;
  std::size_t start_frame = 0;
  std::size_t skip = kFrameSkip;
  std::size_t length = kClipLength;

  std::size_t span() const { return clip_span(length, skip); }
  /// start, start+skip, ..., start+skip*(length-1).
  std::vector<std::size_t> frame_indices() const;
};

/// Valid start frames {0, stride, 2*stride, ...} with start + span <= duration.
/// Durations shorter than one span count as padded to exactly one span.
std::vector<std::size_t> enumerate_clips(std::size_t duration, std::size_t length = kClipLength,
                                         std::size_t skip = kFrameSkip, std::size_t stride = 1);

/// n start frames drawn uniformly from the stride-1 valid starts: without
/// replacement when at least n exist, with replacement otherwise. Returned in
/// draw order.
std::vector<std::size_t> sample_training_clips(std::size_t duration, std::size_t n, Rng& rng,
                                               std::size_t length = kClipLength,
                                               std::size_t skip = kFrameSkip);

struct AugmentConfig {
  std::size_t target_height = 224;
  std::size_t target_width = 224;
  double scale_min = 0.3;
  double scale_max = 1.0;
  std::array<float, 3> channel_mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> channel_std{0.229f, 0.224f, 0.225f};
  bool train_mode = false;

  /// 64 x 64 desk-scale variant.
  static AugmentConfig toy(bool train_mode = false);
  void validate() const;
};

/// Region of a frame, in pixels.
struct CropBox {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Random-resized-crop box: area fraction from [scale_min, scale_max] and
/// aspect ratio log-uniform in [3/4, 4/3]; falls back to the centre square.
CropBox sample_crop(std::size_t frame_height, std::size_t frame_width, const AugmentConfig& cfg,
                    Rng& rng);
/// Largest centred square.
CropBox center_crop(std::size_t frame_height, std::size_t frame_width);

/// Normalized float clip, data[((t*H + y)*W + x)*3 + c].
struct FloatClip {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  float at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return data[((t * height + y) * width + x) * 3 + c];
  }
};

/// Gathers frames start + skip*j from an already padded video, crops (one box
/// shared by all frames; random in train mode, centre square otherwise),
/// bilinearly resizes to the target size and normalizes (x/255 - mean)/std.
/// `crop_out` receives the box used, when given.
FloatClip extract_and_transform(const VideoTensor& padded, const ClipSpec& spec,
                                const AugmentConfig& cfg, Rng& rng, CropBox* crop_out = nullptr);

}  // namespace jepa_fer::data
