#include "jepa_fer/data/labels.hpp"

#include <algorithm>
#include <set>

#include "jepa_fer/error.hpp"

namespace jepa_fer::data {

std::string to_string(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::Ravdess:
      return "RAVDESS";
    case DatasetTag::CremaD:
      return "CREMAD";
    case DatasetTag::Synth:
      return "SYNTH";
  }
  return "?";
}

DatasetTag parse_dataset_tag(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "RAVDESS") return DatasetTag::Ravdess;
  if (upper == "CREMAD" || upper == "CREMA-D") return DatasetTag::CremaD;
  if (upper == "SYNTH") return DatasetTag::Synth;
  throw ConfigError("unknown dataset tag '" + std::string(text) + "'");
}

LabelSet::LabelSet(DatasetTag tag, std::vector<std::string> names)
    : tag_(tag), names_(std::move(names)) {
  if (names_.size() < 2) throw ConfigError("a label set needs at least two classes");
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw ConfigError("label names must be unique");
}

LabelSet LabelSet::ravdess() {
  return LabelSet(DatasetTag::Ravdess,
                  {"anger", "calm", "disgust", "fear", "happy", "neutral", "sad", "surprise"});
}

LabelSet LabelSet::crema_d() {
  return LabelSet(DatasetTag::CremaD, {"anger", "disgust", "fear", "happy", "neutral", "sad"});
}

LabelSet LabelSet::synth(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < classes; ++i) names.push_back("c" + std::to_string(i));
  return LabelSet(DatasetTag::Synth, std::move(names));
}

LabelSet LabelSet::for_dataset(DatasetTag tag, std::size_t synth_classes) {
  switch (tag) {
    case DatasetTag::Ravdess:
      return ravdess();
    case DatasetTag::CremaD:
      return crema_d();
    case DatasetTag::Synth:
      return synth(synth_classes);
  }
  throw ConfigError("unknown dataset tag");
}

std::optional<std::size_t> LabelSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t LabelSet::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ProtocolError("label '" + std::string(name) + "' is not in the " + to_string(tag_) +
                      " label set");
}

}  // namespace jepa_fer::data
