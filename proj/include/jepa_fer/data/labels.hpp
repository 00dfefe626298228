#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace jepa_fer::data {

enum class DatasetTag { Ravdess, CremaD, Synth };

/// "RAVDESS", "CREMAD", "SYNTH".
std::string to_string(DatasetTag tag);
DatasetTag parse_dataset_tag(std::string_view text);

/// Ordered class vocabulary of one dataset. Class indices everywhere
/// (logits, confusion rows, tie-breaks) follow this order.
class LabelSet {
 public:
  LabelSet(DatasetTag tag, std::vector<std::string> names);

  /// anger, calm, disgust, fear, happy, neutral, sad, surprise
  static LabelSet ravdess();
  /// anger, disgust, fear, happy, neutral, sad
  static LabelSet crema_d();
  /// c0 .. c{k-1}
  static LabelSet synth(std::size_t classes);
  static LabelSet for_dataset(DatasetTag tag, std::size_t synth_classes = 3);

  DatasetTag tag() const { return tag_; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws ProtocolError for names outside the set.
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }

  bool operator==(const LabelSet& other) const = default;

 private:
  DatasetTag tag_;
  std::vector<std::string> names_;
};

}  // namespace jepa_fer::data
