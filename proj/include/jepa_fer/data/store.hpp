#pragma once

#include <map>
#include <string>
#include <vector>

#include "jepa_fer/data/manifest.hpp"
#include "jepa_fer/data/video.hpp"

namespace jepa_fer::data {

/// Decoded videos keyed by record id, padded to at least one clip span.
/// Loading is lazy and single-threaded; once preloaded, get() is safe to
/// call from concurrent readers.
class VideoStore {
 public:
  explicit VideoStore(const Manifest& manifest) : manifest_(&manifest) {}

  /// FormatError when the stored frame count disagrees with the manifest.
  const VideoTensor& get(const VideoRecord& record);
  const VideoTensor& get(const VideoRecord& record) const;
  void preload(const std::vector<const VideoRecord*>& records);
  std::size_t size() const { return videos_.size(); }

 private:
  const Manifest* manifest_;
  std::map<std::string, VideoTensor> videos_;
};

}  // namespace jepa_fer::data
