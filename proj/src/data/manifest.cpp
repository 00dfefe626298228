#include "jepa_fer/data/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "jepa_fer/error.hpp"
#include "jepa_fer/io.hpp"

namespace jepa_fer::data {

namespace {

const std::vector<std::string> kColumns = {"id",    "path",    "subject_id",
                                           "label", "dataset", "duration_frames"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

}  // namespace

Manifest Manifest::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(f);
    if (!header_seen) {
      if (fields != kColumns) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": expected header id,path,subject_id,label,dataset,duration_frames");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != kColumns.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 6 columns, got " +
                        std::to_string(fields.size()));
    }
    VideoRecord r;
    r.id = fields[0];
    r.path = fields[1];
    r.subject_id = fields[2];
    r.label = fields[3];
    try {
      r.dataset = parse_dataset_tag(fields[4]);
      r.duration_frames = std::stoul(fields[5]);
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    m.records.push_back(std::move(r));
  }
  if (!header_seen) throw FormatError(path.string() + ": empty manifest");
  m.validate();
  return m;
}

std::string Manifest::to_csv() const {
  std::ostringstream os;
  os << "id,path,subject_id,label,dataset,duration_frames\n";
  for (const auto& r : records) {
    os << r.id << ',' << r.path << ',' << r.subject_id << ',' << r.label << ','
       << to_string(r.dataset) << ',' << r.duration_frames << '\n';
  }
  return os.str();
}

void Manifest::save_csv(const std::filesystem::path& path) const { io::atomic_write(path, to_csv()); }

std::filesystem::path Manifest::resolve(const VideoRecord& record) const {
  std::filesystem::path p(record.path);
  return p.is_absolute() ? p : root / p;
}

std::vector<std::string> Manifest::subjects() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

DatasetTag Manifest::dataset() const {
  if (records.empty()) throw ProtocolError("manifest is empty");
  const auto tag = records.front().dataset;
  for (const auto& r : records) {
    if (r.dataset != tag) throw ProtocolError("manifest mixes datasets");
  }
  return tag;
}

LabelSet Manifest::label_set() const {
  const auto tag = dataset();
  if (tag != DatasetTag::Synth || synth_classes >= 2) return LabelSet::for_dataset(tag, synth_classes);
  std::size_t classes = 2;
  for (const auto& r : records) {
    if (r.label.size() > 1 && r.label[0] == 'c') {
      try {
        classes = std::max<std::size_t>(classes, std::stoul(r.label.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
  return LabelSet::synth(classes);
}

const VideoRecord& Manifest::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return r;
  }
  throw IndexError("no manifest record with id '" + id + "'");
}

void Manifest::validate() const {
  if (records.empty()) return;
  const auto labels = label_set();
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (r.id.empty() || r.subject_id.empty()) throw FormatError("manifest record with empty id/subject");
    if (!ids.insert(r.id).second) throw FormatError("duplicate manifest id '" + r.id + "'");
    if (!labels.contains(r.label)) {
      throw FormatError("record '" + r.id + "': label '" + r.label + "' not in the " +
                        to_string(r.dataset) + " label set");
    }
  }
}

}  // namespace jepa_fer::data
