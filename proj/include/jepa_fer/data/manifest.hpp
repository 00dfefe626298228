#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "jepa_fer/data/labels.hpp"

namespace jepa_fer::data {

struct VideoRecord {
  std::string id;
  std::string path;  // relative paths resolve against the manifest's directory
  std::string subject_id;
  std::string label;
  DatasetTag dataset = DatasetTag::Synth;
  std::size_t duration_frames = 0;
};

/// Video index. CSV columns: id,path,subject_id,label,dataset,duration_frames
struct Manifest {
  std::vector<VideoRecord> records;
  std::filesystem::path root;
  /// Class count for SYNTH label sets (c0..c{k-1}); 0 infers it from the
  /// highest label present.
  std::size_t synth_classes = 0;

  static Manifest load_csv(const std::filesystem::path& path);
  std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;

  std::filesystem::path resolve(const VideoRecord& record) const;
  /// Sorted unique subject ids.
  std::vector<std::string> subjects() const;
  /// The dataset tag shared by every record; ProtocolError when mixed or empty.
  DatasetTag dataset() const;
  LabelSet label_set() const;
  const VideoRecord& find(const std::string& id) const;
  /// Labels must belong to the dataset's label set; ids must be unique.
  void validate() const;
};

}  // namespace jepa_fer::data
