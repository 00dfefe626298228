#include "jepa_fer/data/clips.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jepa_fer/error.hpp"

namespace jepa_fer::data {

std::vector<std::size_t> ClipSpec::frame_indices() const {
  std::vector<std::size_t> out(length);
  for (std::size_t j = 0; j < length; ++j) out[j] = start_frame + skip * j;
  return out;
}

std::vector<std::size_t> enumerate_clips(std::size_t duration, std::size_t length, std::size_t skip,
                                         std::size_t stride) {
  if (length == 0 || skip == 0 || stride == 0) throw ConfigError("enumerate_clips: zero length/skip/stride");
  const std::size_t span = clip_span(length, skip);
  const std::size_t padded = std::max(duration, span);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + span <= padded; s += stride) starts.push_back(s);
  return starts;
}

std::vector<std::size_t> sample_training_clips(std::size_t duration, std::size_t n, Rng& rng,
                                               std::size_t length, std::size_t skip) {
  if (n == 0) throw ConfigError("sample_training_clips: n must be positive");
  auto valid = enumerate_clips(duration, length, skip, 1);
  std::vector<std::size_t> out;
  out.reserve(n);
  if (valid.size() >= n) {
    // Partial Fisher-Yates: the first n slots are a uniform draw without
    // replacement, in draw order.
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(valid.size() - i));
      std::swap(valid[i], valid[j]);
      out.push_back(valid[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(valid[rng.below(valid.size())]);
  }
  return out;
}

AugmentConfig AugmentConfig::toy(bool train_mode) {
  AugmentConfig cfg;
  cfg.target_height = 64;
  cfg.target_width = 64;
  cfg.train_mode = train_mode;
  return cfg;
}

void AugmentConfig::validate() const {
  if (target_height == 0 || target_width == 0) throw ConfigError("augment: target size must be positive");
  if (!(scale_min > 0) || scale_min > scale_max || scale_max > 1) {
    throw ConfigError("augment: need 0 < scale_min <= scale_max <= 1");
  }
  for (float s : channel_std) {
    if (!(s > 0)) throw ConfigError("augment: channel std must be positive");
  }
}

CropBox center_crop(std::size_t frame_height, std::size_t frame_width) {
  const std::size_t side = std::min(frame_height, frame_width);
  return {(frame_height - side) / 2, (frame_width - side) / 2, side, side};
}

CropBox sample_crop(std::size_t frame_height, std::size_t frame_width, const AugmentConfig& cfg,
                    Rng& rng) {
  const double area = static_cast<double>(frame_height * frame_width);
  const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target_area = area * rng.uniform(cfg.scale_min, cfg.scale_max);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target_area * ratio)));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target_area / ratio)));
    if (w >= 1 && h >= 1 && w <= frame_width && h <= frame_height) {
      const auto top = static_cast<std::size_t>(rng.below(frame_height - h + 1));
      const auto left = static_cast<std::size_t>(rng.below(frame_width - w + 1));
      return {top, left, h, w};
    }
  }
  return center_crop(frame_height, frame_width);
}

FloatClip extract_and_transform(const VideoTensor& padded, const ClipSpec& spec,
                                const AugmentConfig& cfg, Rng& rng, CropBox* crop_out) {
  cfg.validate();
  if (padded.channels != 3) throw DimensionError("extract_and_transform: expected 3 channels");
  const auto indices = spec.frame_indices();
  if (indices.back() >= padded.frames) {
    throw ProtocolError("clip " + spec.record_id + " starting at " + std::to_string(spec.start_frame) +
                        " needs frame " + std::to_string(indices.back()) + " but video has " +
                        std::to_string(padded.frames) + " (pad first)");
  }
  const CropBox box = cfg.train_mode ? sample_crop(padded.height, padded.width, cfg, rng)
                                     : center_crop(padded.height, padded.width);
  if (box.height == 0 || box.width == 0 || box.top + box.height > padded.height ||
      box.left + box.width > padded.width) {
    throw ConfigError("crop larger than frame");
  }
  if (crop_out) *crop_out = box;

  const std::size_t th = cfg.target_height, tw = cfg.target_width;
  FloatClip clip;
  clip.frames = indices.size();
  clip.height = th;
  clip.width = tw;
  clip.data.resize(clip.frames * th * tw * 3);

  // Bilinear sampling positions (half-pixel centres), shared by all frames.
  struct Tap {
    std::size_t i0, i1;
    float w1;
  };
  auto taps = [](std::size_t out_n, std::size_t in_n, std::size_t offset) {
    std::vector<Tap> t(out_n);
    const double sc = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (std::size_t o = 0; o < out_n; ++o) {
      double src = (static_cast<double>(o) + 0.5) * sc - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in_n - 1);
      t[o] = {offset + i0, offset + i1, static_cast<float>(src - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ytaps = taps(th, box.height, box.top);
  const auto xtaps = taps(tw, box.width, box.left);
  std::array<float, 3> inv_std{};
  for (int c = 0; c < 3; ++c) inv_std[c] = 1.0f / cfg.channel_std[c];

  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t t = indices[j];
    for (std::size_t y = 0; y < th; ++y) {
      const auto& ty = ytaps[y];
      for (std::size_t x = 0; x < tw; ++x) {
        const auto& tx = xtaps[x];
        for (std::size_t c = 0; c < 3; ++c) {
          const float v00 = padded.at(t, ty.i0, tx.i0, c);
          const float v01 = padded.at(t, ty.i0, tx.i1, c);
          const float v10 = padded.at(t, ty.i1, tx.i0, c);
          const float v11 = padded.at(t, ty.i1, tx.i1, c);
          const float top = v00 + (v01 - v00) * tx.w1;
          const float bottom = v10 + (v11 - v10) * tx.w1;
          const float v = top + (bottom - top) * ty.w1;
          clip.data[((j * th + y) * tw + x) * 3 + c] = (v / 255.0f - cfg.channel_mean[c]) * inv_std[c];
        }
      }
    }
  }
  return clip;
}

}  // namespace jepa_fer::data
