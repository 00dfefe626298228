#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "jepa_fer/data/labels.hpp"

namespace jepa_fer::eval {

enum class Voting { Mv, Pbv };

std::string to_string(Voting voting);
Voting parse_voting(const std::string& text);

struct VideoPrediction {
  std::size_t predicted = 0;
  std::vector<double> evidence;  // votes (MV) or summed probabilities (PBV)
};

/// Each clip votes for its argmax; most votes wins; ties go to the lowest
/// class index. ProtocolError on an empty list.
VideoPrediction vote_mv(const std::vector<std::vector<double>>& clip_probs);
/// Probabilities summed over clips; argmax with the same tie-break.
VideoPrediction vote_pbv(const std::vector<std::vector<double>>& clip_probs);
VideoPrediction vote(Voting voting, const std::vector<std::vector<double>>& clip_probs);

/// Lowest index among the maxima.
std::size_t argmax_first(const std::vector<double>& values);

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1);
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  std::size_t classes() const { return k_; }
  std::size_t row_total(std::size_t truth) const;
  std::size_t total() const;
  std::size_t trace() const;
  void merge(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const = default;

 private:
  std::size_t k_;
  std::vector<std::size_t> counts_;
};

struct UarResult {
  double value = 0.0;
  std::vector<std::size_t> excluded;  // classes without ground-truth samples
};

/// Mean per-class recall over classes that occur; the rest are excluded and
/// listed. ProtocolError when no class occurs.
UarResult uar_detail(const ConfusionMatrix& cm);
double uar(const ConfusionMatrix& cm);
/// Class-frequency-weighted recall, i.e. trace / total. ProtocolError when empty.
double war(const ConfusionMatrix& cm);

struct FoldMetrics {
  double uar = 0.0;
  double war = 0.0;
  std::vector<std::size_t> excluded;
  std::size_t evaluated = 0;
  std::size_t dropped = 0;
};

enum class HarmonizationMode { DropOnly, MergeCalmNeutral };

std::string to_string(HarmonizationMode mode);
HarmonizationMode parse_mode(const std::string& text);

/// Per-fold metrics plus their aggregation. std_* use the sample (n - 1)
/// convention and are 0 for a single fold.
struct MetricsReport {
  std::string dataset;
  Voting voting = Voting::Pbv;
  std::optional<HarmonizationMode> mode;
  std::optional<std::string> source_dataset;
  std::vector<std::string> labels;
  std::vector<FoldMetrics> folds;
  double mean_uar = 0.0;
  double mean_war = 0.0;
  double std_uar = 0.0;
  double std_war = 0.0;
  std::size_t dropped = 0;
  ConfusionMatrix summed{1};
  std::vector<double> averaged;  // K x K, summed / fold count

  /// Builds the aggregate from per-fold matrices.
  static MetricsReport aggregate(std::string dataset, Voting voting, std::vector<std::string> labels,
                                 const std::vector<ConfusionMatrix>& per_fold,
                                 const std::vector<std::size_t>& dropped_per_fold = {});
};

}  // namespace jepa_fer::eval
