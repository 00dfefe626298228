#include "jepa_fer/data/video.hpp"

#include <algorithm>

#include "jepa_fer/error.hpp"
#include "jepa_fer/io.hpp"

namespace jepa_fer::data {

namespace {
constexpr std::string_view kMagic = "RVT1";
}

VideoTensor VideoTensor::blank(std::size_t frames, std::size_t height, std::size_t width,
                               std::size_t channels) {
  if (frames == 0 || height == 0 || width == 0 || channels == 0) {
    throw DimensionError("video extents must be positive");
  }
  VideoTensor v;
  v.frames = frames;
  v.height = height;
  v.width = width;
  v.channels = channels;
  v.data.assign(frames * height * width * channels, 0);
  return v;
}

std::string encode_rvt1(const VideoTensor& video) {
  if (video.data.size() != video.frames * video.frame_size()) {
    throw DimensionError("video payload does not match its extents");
  }
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(video.frames));
  w.u32(static_cast<std::uint32_t>(video.height));
  w.u32(static_cast<std::uint32_t>(video.width));
  w.u32(static_cast<std::uint32_t>(video.channels));
  w.bytes(std::string_view(reinterpret_cast<const char*>(video.data.data()), video.data.size()));
  return w.take();
}

VideoTensor decode_rvt1(std::string_view bytes) {
  io::ByteReader r(std::span<const char>(bytes.data(), bytes.size()));
  if (bytes.size() < 4 || r.bytes(4) != kMagic) throw FormatError("RVT1: bad magic at byte offset 0");
  VideoTensor v;
  v.frames = r.u32();
  v.height = r.u32();
  v.width = r.u32();
  v.channels = r.u32();
  if (v.frames == 0 || v.height == 0 || v.width == 0 || v.channels == 0) {
    throw FormatError("RVT1: zero extent in header at byte offset 4");
  }
  const std::size_t expected = v.frames * v.frame_size();
  if (r.remaining() < expected) {
    throw FormatError("RVT1: truncated payload at byte offset " + std::to_string(r.offset()) +
                      ": header declares " + std::to_string(expected) + " bytes, file has " +
                      std::to_string(r.remaining()));
  }
  if (r.remaining() > expected) {
    throw FormatError("RVT1: trailing bytes at byte offset " + std::to_string(r.offset() + expected));
  }
  const auto payload = r.bytes(expected);
  v.data.assign(payload.begin(), payload.end());
  return v;
}

void save_video(const std::filesystem::path& path, const VideoTensor& video) {
  io::atomic_write(path, encode_rvt1(video));
}

VideoTensor load_video(const std::filesystem::path& path) {
  try {
    return decode_rvt1(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

VideoTensor pad_video(const VideoTensor& video, std::size_t min_frames) {
  if (video.frames == 0) throw DimensionError("pad_video: empty video");
  VideoTensor out = video;
  if (video.frames >= min_frames) return out;
  const std::size_t fs = video.frame_size();
  out.frames = min_frames;
  out.data.resize(min_frames * fs);
  const std::uint8_t* last = video.frame(video.frames - 1);
  for (std::size_t t = video.frames; t < min_frames; ++t) {
    std::copy_n(last, fs, out.data.data() + t * fs);
  }
  return out;
}

}  // namespace jepa_fer::data
