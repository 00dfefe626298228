#include "jepa_fer/eval/protocol.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "jepa_fer/error.hpp"
#include "jepa_fer/ops.hpp"

namespace jepa_fer::eval {

std::vector<std::vector<VideoClipProbs>> predict_videos_multi(
    const vit::Encoder<float>& encoder, const std::vector<const probe::AttentiveProbe<float>*>& probes,
    data::VideoStore& store, const std::vector<const data::VideoRecord*>& records, const data::LabelSet& labels,
    const EvalOptions& opts) {
  if (opts.augment.train_mode) throw ConfigError("evaluation uses the eval-mode transform");
  if (opts.stride == 0) throw ConfigError("clip stride must be >= 1");
  store.preload(records);
  const auto d = encoder.config().embed_dim;
  std::vector<std::vector<VideoClipProbs>> out(probes.size());
  Rng unused(0);
  for (const auto* rec : records) {
    const auto truth = labels.index_of(rec->label);
    const auto& video = store.get(*rec);
    std::vector<data::FloatClip> clips;
    for (auto s : data::enumerate_clips(video.frames, data::kClipLength, data::kFrameSkip, opts.stride)) {
      clips.push_back(data::extract_and_transform(video, {rec->id, s}, opts.augment, unused));
    }
    const auto features = probe::encode_clips(encoder, clips);
    const double n = static_cast<double>(features.size());
    NoGradGuard no_grad;
    std::vector<double> average(d, 0.0);
    for (const auto& f : features) {
      const auto avg = mean_rows(f);
      for (std::size_t j = 0; j < d; ++j) average[j] += avg.value(j) / n;
    }
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const auto& head = *probes[p];
      VideoClipProbs v{rec->id, truth, {}, average, average};
      if (head.config().pooling == probe::Pooling::Attentive) {
        v.attentive_embedding.assign(d, 0.0);
        for (const auto& f : features) {
          const auto pooled = head.pool(f);
          for (std::size_t j = 0; j < d; ++j) v.attentive_embedding[j] += pooled.value(j) / n;
        }
      }
      for (const auto& f : features) v.clip_probs.push_back(probe::class_probabilities(head, f));
      out[p].push_back(std::move(v));
    }
  }
  return out;
}

std::vector<VideoClipProbs> predict_videos(const vit::Encoder<float>& encoder,
                                           const probe::AttentiveProbe<float>& probe, data::VideoStore& store,
                                           const std::vector<const data::VideoRecord*>& records,
                                           const data::LabelSet& labels, const EvalOptions& opts) {
  return predict_videos_multi(encoder, {&probe}, store, records, labels, opts).front();
}

ConfusionMatrix confusion_from(const std::vector<VideoClipProbs>& videos, Voting voting, std::size_t classes) {
  ConfusionMatrix cm(classes);
  for (const auto& v : videos) {
    const auto pred = vote(voting, v.clip_probs);
    if (pred.evidence.size() != classes) {
      throw ProtocolError("probe predicts " + std::to_string(pred.evidence.size()) + " classes, labels have " +
                          std::to_string(classes));
    }
    cm.add(v.truth, pred.predicted);
  }
  return cm;
}

ConfusionMatrix evaluate_fold(const vit::Encoder<float>& encoder, const probe::AttentiveProbe<float>& probe,
                              const data::Manifest& manifest, data::VideoStore& store, const data::FoldPlan& plan,
                              std::size_t fold_index, Voting voting, const EvalOptions& opts) {
  if (fold_index >= plan.folds.size()) throw IndexError("fold " + std::to_string(fold_index) + " out of range");
  const auto split = data::split_fold(manifest, plan, fold_index);
  if (split.validation.empty()) {
    throw ProtocolError("fold " + std::to_string(fold_index) + " has no validation videos");
  }
  const auto labels = manifest.label_set();
  return confusion_from(predict_videos(encoder, probe, store, split.validation, labels, opts), voting,
                        labels.size());
}

HarmonizedResult harmonize(const data::LabelSet& source, const data::LabelSet& target, HarmonizationMode mode,
                           Voting voting, const std::vector<VideoClipProbs>& videos) {
  using data::DatasetTag;
  if (source.tag() == target.tag()) {
    throw UsageError("harmonization applies only across datasets (both sides are " + data::to_string(source.tag()) +
                     ")");
  }
  const bool ravdess_on_crema = source.tag() == DatasetTag::Ravdess && target.tag() == DatasetTag::CremaD;
  const bool crema_on_ravdess = source.tag() == DatasetTag::CremaD && target.tag() == DatasetTag::Ravdess;
  if (!ravdess_on_crema && !crema_on_ravdess) {
    throw ProtocolError("cross-dataset evaluation supports RAVDESS <-> CREMA-D only");
  }
  const auto shared = data::LabelSet::crema_d();
  HarmonizedResult r;
  r.cm = ConfusionMatrix(shared.size());
  r.labels = shared.names();
  r.total = videos.size();
  for (const auto& v : videos) {
    const auto pred = vote(voting, v.clip_probs);
    if (pred.evidence.size() != source.size()) throw ProtocolError("probe output does not match its label set");
    std::string predicted = source.name(pred.predicted);
    std::string truth = target.name(v.truth);
    // The side that carries the extra classes is the prediction for a
    // RAVDESS probe and the ground truth for a CREMA-D probe.
    std::string& extra = ravdess_on_crema ? predicted : truth;
    if (extra == "surprise" || (extra == "calm" && mode == HarmonizationMode::DropOnly)) {
      ++r.dropped;
      continue;
    }
    if (extra == "calm") extra = "neutral";
    r.cm.add(shared.index_of(truth), shared.index_of(predicted));
    ++r.evaluated;
  }
  return r;
}

MetricsReport cross_report(const data::LabelSet& source, const data::LabelSet& target, HarmonizationMode mode,
                           Voting voting, const std::vector<std::vector<VideoClipProbs>>& per_probe) {
  std::vector<ConfusionMatrix> cms;
  std::vector<std::size_t> dropped;
  std::vector<std::string> labels;
  for (const auto& videos : per_probe) {
    auto h = harmonize(source, target, mode, voting, videos);
    cms.push_back(h.cm);
    dropped.push_back(h.dropped);
    labels = h.labels;
  }
  auto report = MetricsReport::aggregate(data::to_string(target.tag()), voting, labels, cms, dropped);
  report.mode = mode;
  report.source_dataset = data::to_string(source.tag());
  return report;
}

Pca2 pca2(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw ProtocolError("pca needs at least two samples");
  const auto n = rows.size(), d = rows.front().size();
  if (d < 2) throw DimensionError("pca needs at least two dimensions");
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != d) throw DimensionError("pca: rows differ in length");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j];
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  Eigen::MatrixXd v = svd.matrixV().leftCols(2);
  for (int c = 0; c < 2; ++c) {
    const double tol = 1e-12 * v.col(c).cwiseAbs().maxCoeff();
    for (int j = 0; j < v.rows(); ++j) {
      if (std::abs(v(j, c)) > tol) {
        if (v(j, c) < 0) v.col(c) *= -1.0;
        break;
      }
    }
  }
  const Eigen::MatrixXd proj = x * v;
  Pca2 out;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out.coords.push_back({proj(i, 0), proj(i, 1)});
  for (int c = 0; c < 2; ++c) {
    out.variance[c] = proj.col(c).squaredNorm() / denom;
    out.components[c].assign(v.col(c).data(), v.col(c).data() + d);
  }
  out.total_variance = x.squaredNorm() / denom;
  return out;
}

}  // namespace jepa_fer::eval
