#include "jepa_fer/data/folds.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jepa_fer/error.hpp"
#include "jepa_fer/io.hpp"
#include "jepa_fer/rng.hpp"

namespace jepa_fer::data {

std::string to_string(FoldSource source) {
  return source == FoldSource::Table ? "table" : "generated";
}

std::string FoldPlan::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["source"] = to_string(source);
  if (source == FoldSource::Generated) j["seed"] = seed;
  j["folds"] = folds;
  return j.dump(2) + "\n";
}

FoldPlan FoldPlan::from_json(const std::string& text) {
  FoldPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    plan.k = j.at("k").get<std::size_t>();
    const auto source = j.at("source").get<std::string>();
    if (source == "table") {
      plan.source = FoldSource::Table;
    } else if (source == "generated") {
      plan.source = FoldSource::Generated;
    } else {
      throw FormatError("fold plan: unknown source '" + source + "'");
    }
    if (j.contains("seed")) plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& fold : j.at("folds")) {
      std::vector<std::string> ids;
      for (const auto& id : fold) ids.push_back(id.is_string() ? id.get<std::string>() : id.dump());
      plan.folds.push_back(std::move(ids));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fold plan: ") + e.what());
  }
  if (plan.folds.size() != plan.k) {
    throw FormatError("fold plan: k=" + std::to_string(plan.k) + " but " +
                      std::to_string(plan.folds.size()) + " folds listed");
  }
  return plan;
}

void FoldPlan::save(const std::filesystem::path& path) const { io::atomic_write(path, to_json()); }

FoldPlan FoldPlan::load(const std::filesystem::path& path) { return from_json(io::read_file(path)); }

std::vector<std::size_t> FoldPlan::sizes() const {
  std::vector<std::size_t> out;
  for (const auto& f : folds) out.push_back(f.size());
  return out;
}

std::size_t FoldPlan::fold_of(const std::string& subject) const {
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (std::find(folds[i].begin(), folds[i].end(), subject) != folds[i].end()) return i;
  }
  return folds.size();
}

FoldPlan crema_d_table_plan() {
  // Short ids as published; the official numbering prefixes 1000.
  static const std::vector<std::vector<int>> kShortIds = {
      {2, 3, 8, 10, 14, 16, 22, 32, 51, 54, 60, 66, 68, 70, 72, 77, 78, 86, 88},
      {4, 11, 12, 13, 19, 30, 33, 35, 39, 40, 48, 49, 53, 57, 67, 71, 73, 81},
      {5, 6, 17, 26, 28, 34, 42, 44, 50, 59, 64, 69, 82, 83, 84, 87, 90, 91},
      {7, 9, 15, 21, 23, 29, 36, 37, 38, 41, 45, 52, 55, 58, 61, 62, 74, 76},
      {1, 18, 20, 24, 25, 27, 31, 43, 46, 47, 56, 63, 65, 75, 79, 80, 85, 89},
  };
  FoldPlan plan;
  plan.k = kShortIds.size();
  plan.source = FoldSource::Table;
  for (const auto& fold : kShortIds) {
    std::vector<std::string> ids;
    for (int id : fold) ids.push_back(std::to_string(1000 + id));
    plan.folds.push_back(std::move(ids));
  }
  return plan;
}

std::vector<std::string> crema_d_subjects() {
  std::vector<std::string> ids;
  for (int i = 1001; i <= 1091; ++i) ids.push_back(std::to_string(i));
  return ids;
}

FoldPlan make_folds(const Manifest& manifest, std::size_t k, FoldSource source, std::uint64_t seed) {
  if (k < 2) throw ConfigError("make_folds: need k >= 2");
  for (const auto& r : manifest.records) {
    if (r.subject_id.empty()) throw ProtocolError("make_folds: record '" + r.id + "' has no subject");
  }
  if (source == FoldSource::Table) {
    if (manifest.dataset() != DatasetTag::CremaD) {
      throw ProtocolError("make_folds: the built-in table plan only applies to CREMA-D manifests");
    }
    auto plan = crema_d_table_plan();
    if (plan.k != k) throw ConfigError("make_folds: the table plan has exactly 5 folds");
    return plan;
  }
  auto subjects = manifest.subjects();
  if (subjects.size() < k) {
    throw ConfigError("make_folds: " + std::to_string(subjects.size()) + " subjects cannot fill " +
                      std::to_string(k) + " folds");
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(subjects));
  FoldPlan plan;
  plan.k = k;
  plan.source = FoldSource::Generated;
  plan.seed = seed;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < subjects.size(); ++i) plan.folds[i % k].push_back(subjects[i]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

namespace {

FoldReport verify_impl(const FoldPlan& plan, const std::vector<std::string>& subjects,
                       const std::map<std::string, std::size_t>& videos_per_subject) {
  FoldReport report;
  std::map<std::string, std::vector<std::size_t>> owner;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (const auto& s : plan.folds[f]) owner[s].push_back(f);
  }
  for (const auto& [subject, folds] : owner) {
    if (folds.size() > 1) {
      report.duplicated.push_back(subject);
      std::ostringstream os;
      os << "subject " << subject << " appears in folds";
      for (auto f : folds) os << ' ' << (f + 1);
      report.problems.push_back(os.str());
    }
  }
  const std::set<std::string> roster(subjects.begin(), subjects.end());
  for (const auto& s : roster) {
    if (!owner.count(s)) {
      report.missing.push_back(s);
      report.problems.push_back("subject " + s + " is in no fold");
    }
  }
  for (const auto& [subject, folds] : owner) {
    if (!roster.count(subject)) report.unused.push_back(subject);
  }
  if (plan.folds.size() != plan.k) {
    report.problems.push_back("plan declares k=" + std::to_string(plan.k) + " but has " +
                              std::to_string(plan.folds.size()) + " folds");
  }
  for (const auto& fold : plan.folds) {
    FoldStats st;
    st.subjects = fold.size();
    for (const auto& s : fold) {
      if (auto it = videos_per_subject.find(s); it != videos_per_subject.end()) st.videos += it->second;
    }
    report.per_fold.push_back(st);
  }
  report.passed = report.problems.empty();
  return report;
}

}  // namespace

FoldReport verify_folds(const FoldPlan& plan, const Manifest& manifest) {
  std::map<std::string, std::size_t> videos;
  for (const auto& r : manifest.records) videos[r.subject_id] += 1;
  return verify_impl(plan, manifest.subjects(), videos);
}

FoldReport verify_folds(const FoldPlan& plan, const std::vector<std::string>& subjects) {
  return verify_impl(plan, subjects, {});
}

std::string FoldReport::to_text() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << '\n';
  for (std::size_t f = 0; f < per_fold.size(); ++f) {
    os << "fold " << (f + 1) << ": " << per_fold[f].subjects << " subjects, " << per_fold[f].videos
       << " videos\n";
  }
  for (const auto& p : problems) os << "  problem: " << p << '\n';
  if (!unused.empty()) os << "  note: " << unused.size() << " plan subjects not in manifest\n";
  return os.str();
}

FoldSplit split_fold(const Manifest& manifest, const FoldPlan& plan, std::size_t fold_index) {
  if (fold_index >= plan.folds.size()) {
    throw IndexError("fold " + std::to_string(fold_index) + " out of range for " +
                     std::to_string(plan.folds.size()) + " folds");
  }
  const std::set<std::string> held_out(plan.folds[fold_index].begin(), plan.folds[fold_index].end());
  FoldSplit split;
  for (const auto& r : manifest.records) {
    (held_out.count(r.subject_id) ? split.validation : split.train).push_back(&r);
  }
  return split;
}

}  // namespace jepa_fer::data
