#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jepa_fer/data/manifest.hpp"

namespace jepa_fer::data {

enum class FoldSource { Table, Generated };

std::string to_string(FoldSource source);

/// Subject-independent k-fold plan. JSON: {"k", "source", "seed"?, "folds": [[ids]]}
struct FoldPlan {
  std::size_t k = 5;
  FoldSource source = FoldSource::Generated;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> folds;

  std::string to_json() const;
  static FoldPlan from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static FoldPlan load(const std::filesystem::path& path);

  std::vector<std::size_t> sizes() const;
  /// Index of the fold holding `subject`, or folds.size() when absent.
  std::size_t fold_of(const std::string& subject) const;
};

/// The published CREMA-D five-fold subject split, with ids in the official
/// 1001-1091 numbering.
FoldPlan crema_d_table_plan();
/// 1001 .. 1091.
std::vector<std::string> crema_d_subjects();

/// Table: the built-in CREMA-D plan (ProtocolError for other manifests).
/// Generated: subjects shuffled with `seed` and dealt round-robin, so fold
/// sizes differ by at most one.
FoldPlan make_folds(const Manifest& manifest, std::size_t k, FoldSource source, std::uint64_t seed = 0);

struct FoldStats {
  std::size_t subjects = 0;
  std::size_t videos = 0;
};

struct FoldReport {
  bool passed = true;
  std::vector<std::string> duplicated;        // subjects in more than one fold
  std::vector<std::string> missing;           // manifest subjects in no fold
  std::vector<std::string> unused;            // plan subjects absent from the manifest (informational)
  std::vector<FoldStats> per_fold;
  std::vector<std::string> problems;          // human-readable failures

  std::string to_text() const;
};

FoldReport verify_folds(const FoldPlan& plan, const Manifest& manifest);
/// Coverage against an explicit subject roster instead of a manifest.
FoldReport verify_folds(const FoldPlan& plan, const std::vector<std::string>& subjects);

struct FoldSplit {
  std::vector<const VideoRecord*> train;
  std::vector<const VideoRecord*> validation;
};

/// Validation = records whose subject is in fold `fold_index`; train = rest.
FoldSplit split_fold(const Manifest& manifest, const FoldPlan& plan, std::size_t fold_index);

}  // namespace jepa_fer::data
