#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace jepa_fer::data {

/// Raw 8-bit video, frame-major then row-major: data[((t*H + y)*W + x)*C + c].
struct VideoTensor {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> data;
  double frame_rate = 24.0;  // informational, not stored in RVT1

  static VideoTensor blank(std::size_t frames, std::size_t height, std::size_t width,
                           std::size_t channels = 3);

  std::size_t frame_size() const { return height * width * channels; }
  const std::uint8_t* frame(std::size_t t) const { return data.data() + t * frame_size(); }
  std::uint8_t* frame(std::size_t t) { return data.data() + t * frame_size(); }
  std::uint8_t at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return data[((t * height + y) * width + x) * channels + c];
  }

  bool operator==(const VideoTensor& other) const {
    return frames == other.frames && height == other.height && width == other.width &&
           channels == other.channels && data == other.data;
  }
};

/// RVT1 container: "RVT1" | u32 T | u32 H | u32 W | u32 C | u8 payload, little-endian.
std::string encode_rvt1(const VideoTensor& video);
VideoTensor decode_rvt1(std::string_view bytes);

void save_video(const std::filesystem::path& path, const VideoTensor& video);
VideoTensor load_video(const std::filesystem::path& path);

/// Repeats the last frame until the video has at least `min_frames` frames.
VideoTensor pad_video(const VideoTensor& video, std::size_t min_frames);

}  // namespace jepa_fer::data
