#include "jepa_fer/data/store.hpp"

#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/error.hpp"

namespace jepa_fer::data {

const VideoTensor& VideoStore::get(const VideoRecord& record) {
  auto it = videos_.find(record.id);
  if (it != videos_.end()) return it->second;
  auto video = load_video(manifest_->resolve(record));
  if (video.frames != record.duration_frames) {
    throw FormatError("video " + record.id + ": manifest says " + std::to_string(record.duration_frames) +
                      " frames, file holds " + std::to_string(video.frames));
  }
  return videos_.emplace(record.id, pad_video(video, clip_span())).first->second;
}

const VideoTensor& VideoStore::get(const VideoRecord& record) const {
  auto it = videos_.find(record.id);
  if (it == videos_.end()) throw UsageError("video " + record.id + " was not preloaded");
  return it->second;
}

void VideoStore::preload(const std::vector<const VideoRecord*>& records) {
  for (const auto* r : records) get(*r);
}

}  // namespace jepa_fer::data
