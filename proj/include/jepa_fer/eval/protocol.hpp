#pragma once

#include <array>
#include <string>
#include <vector>

#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/data/folds.hpp"
#include "jepa_fer/data/labels.hpp"
#include "jepa_fer/data/manifest.hpp"
#include "jepa_fer/data/store.hpp"
#include "jepa_fer/eval/metrics.hpp"
#include "jepa_fer/probe/probe.hpp"
#include "jepa_fer/vit/transformer.hpp"

namespace jepa_fer::eval {

struct EvalOptions {
  std::size_t stride = 1;  // start-frame step between enumerated clips
  data::AugmentConfig augment = data::AugmentConfig::toy(false);
};

/// Everything the probe says about one video, before voting.
struct VideoClipProbs {
  std::string video_id;
  std::size_t truth = 0;                         // index in the video's own label set
  std::vector<std::vector<double>> clip_probs;   // one row per clip, probe classes
  std::vector<double> attentive_embedding;       // probe-pooled token, mean over clips
  std::vector<double> average_embedding;         // token mean, mean over clips
};

/// Every clip of every record (eval-mode transform), encoded and classified.
/// Records are processed in the given order; clips of a record are encoded
/// in parallel.
std::vector<VideoClipProbs> predict_videos(const vit::Encoder<float>& encoder,
                                           const probe::AttentiveProbe<float>& probe, data::VideoStore& store,
                                           const std::vector<const data::VideoRecord*>& records,
                                           const data::LabelSet& labels, const EvalOptions& opts = {});

/// Same, for several probes sharing one encoder: clips are encoded once and
/// every probe classifies them. Result is indexed [probe][record].
std::vector<std::vector<VideoClipProbs>> predict_videos_multi(
    const vit::Encoder<float>& encoder, const std::vector<const probe::AttentiveProbe<float>*>& probes,
    data::VideoStore& store, const std::vector<const data::VideoRecord*>& records, const data::LabelSet& labels,
    const EvalOptions& opts = {});

/// Votes each video and accumulates truth x prediction. ProtocolError when
/// the probe's class count differs from `classes`.
ConfusionMatrix confusion_from(const std::vector<VideoClipProbs>& videos, Voting voting, std::size_t classes);

/// Validation side of one fold through the same-dataset protocol.
ConfusionMatrix evaluate_fold(const vit::Encoder<float>& encoder, const probe::AttentiveProbe<float>& probe,
                              const data::Manifest& manifest, data::VideoStore& store, const data::FoldPlan& plan,
                              std::size_t fold_index, Voting voting, const EvalOptions& opts = {});

struct HarmonizedResult {
  ConfusionMatrix cm{1};
  std::vector<std::string> labels;  // the shared (CREMA-D) class set
  std::size_t evaluated = 0;
  std::size_t dropped = 0;
  std::size_t total = 0;
};

/// Cross-dataset reconciliation between RAVDESS and CREMA-D.
///  RAVDESS probe on CREMA-D videos: a video whose vote is "surprise" is
///  dropped; a "calm" vote is dropped (DropOnly) or read as "neutral" (Merge).
///  CREMA-D probe on RAVDESS videos: "surprise" videos are skipped; "calm"
///  videos are skipped (DropOnly) or relabelled "neutral" (Merge).
/// UsageError when both sides share a dataset; ProtocolError for any other
/// pairing.
HarmonizedResult harmonize(const data::LabelSet& source, const data::LabelSet& target, HarmonizationMode mode,
                           Voting voting, const std::vector<VideoClipProbs>& videos);

/// Aggregates one harmonized result per source-trained probe.
MetricsReport cross_report(const data::LabelSet& source, const data::LabelSet& target, HarmonizationMode mode,
                           Voting voting, const std::vector<std::vector<VideoClipProbs>>& per_probe);

struct Pca2 {
  std::vector<std::array<double, 2>> coords;
  std::array<double, 2> variance{};   // of each projected coordinate, / (N - 1)
  double total_variance = 0.0;        // trace of the covariance, / (N - 1)
  std::array<std::vector<double>, 2> components;

  double variance_ratio(std::size_t i) const { return total_variance > 0 ? variance[i] / total_variance : 0.0; }
};

/// Mean-centred rows projected on the top two right singular vectors; each
/// component's first non-negligible loading is made positive. DimensionError
/// when D < 2, ProtocolError when N < 2.
Pca2 pca2(const std::vector<std::vector<double>>& rows);

}  // namespace jepa_fer::eval
