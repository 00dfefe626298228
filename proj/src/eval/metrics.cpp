#include "jepa_fer/eval/metrics.hpp"

#include <cmath>
#include <tuple>

#include "jepa_fer/error.hpp"

namespace jepa_fer::eval {

std::string to_string(Voting voting) { return voting == Voting::Mv ? "mv" : "pbv"; }

Voting parse_voting(const std::string& text) {
  if (text == "mv") return Voting::Mv;
  if (text == "pbv") return Voting::Pbv;
  throw ConfigError("unknown voting '" + text + "' (expected mv or pbv)");
}

std::string to_string(HarmonizationMode mode) { return mode == HarmonizationMode::DropOnly ? "drop" : "merge"; }

HarmonizationMode parse_mode(const std::string& text) {
  if (text == "drop") return HarmonizationMode::DropOnly;
  if (text == "merge") return HarmonizationMode::MergeCalmNeutral;
  throw ConfigError("unknown harmonization mode '" + text + "' (expected drop or merge)");
}

std::size_t argmax_first(const std::vector<double>& values) {
  if (values.empty()) throw DimensionError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

std::size_t check_clips(const std::vector<std::vector<double>>& clip_probs) {
  if (clip_probs.empty()) throw ProtocolError("voting needs at least one clip");
  const auto k = clip_probs.front().size();
  if (k == 0) throw DimensionError("voting: empty probability vector");
  for (const auto& p : clip_probs) {
    if (p.size() != k) throw DimensionError("voting: clips disagree on the class count");
  }
  return k;
}

}  // namespace

VideoPrediction vote_mv(const std::vector<std::vector<double>>& clip_probs) {
  VideoPrediction out;
  out.evidence.assign(check_clips(clip_probs), 0.0);
  for (const auto& p : clip_probs) out.evidence[argmax_first(p)] += 1.0;
  out.predicted = argmax_first(out.evidence);
  return out;
}

VideoPrediction vote_pbv(const std::vector<std::vector<double>>& clip_probs) {
  VideoPrediction out;
  out.evidence.assign(check_clips(clip_probs), 0.0);
  for (const auto& p : clip_probs) {
    for (std::size_t c = 0; c < p.size(); ++c) out.evidence[c] += p[c];
  }
  out.predicted = argmax_first(out.evidence);
  return out;
}

VideoPrediction vote(Voting voting, const std::vector<std::vector<double>>& clip_probs) {
  return voting == Voting::Mv ? vote_mv(clip_probs) : vote_pbv(clip_probs);
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw DimensionError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t count) {
  if (truth >= k_ || predicted >= k_) {
    throw IndexError("confusion entry (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                     ") outside " + std::to_string(k_) + " classes");
  }
  counts_[truth * k_ + predicted] += count;
}

std::size_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < k_; ++p) n += at(truth, p);
  return n;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < k_; ++c) n += at(c, c);
  return n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw DimensionError("cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

UarResult uar_detail(const ConfusionMatrix& cm) {
  UarResult r;
  double sum = 0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto n = cm.row_total(c);
    if (n == 0) {
      r.excluded.push_back(c);
      continue;
    }
    sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(n);
    ++used;
  }
  if (used == 0) throw ProtocolError("uar: confusion matrix is empty");
  r.value = sum / static_cast<double>(used);
  return r;
}

double uar(const ConfusionMatrix& cm) { return uar_detail(cm).value; }

double war(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw ProtocolError("war: confusion matrix is empty");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0;
  for (auto x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0;
  for (auto x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

MetricsReport MetricsReport::aggregate(std::string dataset, Voting voting, std::vector<std::string> labels,
                                       const std::vector<ConfusionMatrix>& per_fold,
                                       const std::vector<std::size_t>& dropped_per_fold) {
  if (per_fold.empty()) throw ProtocolError("metrics: no folds to aggregate");
  if (!dropped_per_fold.empty() && dropped_per_fold.size() != per_fold.size()) {
    throw DimensionError("metrics: dropped counts do not match the fold count");
  }
  const auto k = per_fold.front().classes();
  if (labels.size() != k) throw DimensionError("metrics: label count does not match the confusion matrix");

  MetricsReport r;
  r.dataset = std::move(dataset);
  r.voting = voting;
  r.labels = std::move(labels);
  r.summed = ConfusionMatrix(k);
  std::vector<double> uars, wars;
  for (std::size_t f = 0; f < per_fold.size(); ++f) {
    const auto& cm = per_fold[f];
    const auto u = uar_detail(cm);
    FoldMetrics fm{u.value, war(cm), u.excluded, cm.total(), dropped_per_fold.empty() ? 0 : dropped_per_fold[f]};
    uars.push_back(fm.uar);
    wars.push_back(fm.war);
    r.dropped += fm.dropped;
    r.folds.push_back(std::move(fm));
    r.summed.merge(cm);
  }
  std::tie(r.mean_uar, r.std_uar) = mean_std(uars);
  std::tie(r.mean_war, r.std_war) = mean_std(wars);
  r.averaged.resize(k * k);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) {
      r.averaged[t * k + p] = static_cast<double>(r.summed.at(t, p)) / static_cast<double>(per_fold.size());
    }
  }
  return r;
}

}  // namespace jepa_fer::eval
