#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jepa_fer/checkpoint.hpp"
#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/data/folds.hpp"
#include "jepa_fer/data/labels.hpp"
#include "jepa_fer/data/manifest.hpp"
#include "jepa_fer/data/store.hpp"
#include "jepa_fer/rng.hpp"
#include "jepa_fer/vit/transformer.hpp"

namespace jepa_fer::probe {

enum class Pooling { Attentive, Average };

std::string to_string(Pooling pooling);
Pooling parse_pooling(const std::string& text);

struct ProbeConfig {
  std::size_t dim = 128;
  std::size_t heads = 4;
  std::size_t classes = 3;
  std::size_t hidden = 0;  // MLP width; 0 means dim
  Pooling pooling = Pooling::Attentive;

  std::size_t mlp_hidden() const { return hidden ? hidden : dim; }
  void validate() const;
};

/// One learnable query cross-attends over the encoder tokens (keys, values and
/// output projected, multi-head), then a 3-layer GELU MLP maps the pooled
/// token to class logits. With Pooling::Average the attention is replaced by
/// a plain token mean and only the MLP is learned.
template <typename Real>
class AttentiveProbe {
 public:
  using value_type = Real;

  AttentiveProbe(const ProbeConfig& cfg, Rng& rng);

  const ProbeConfig& config() const { return cfg_; }

  /// tokens (N x D) -> 1 x D.
  BasicTensor<Real> pool(const BasicTensor<Real>& tokens) const;
  /// tokens (N x D) -> logits (1 x K).
  BasicTensor<Real> classify(const BasicTensor<Real>& tokens) const;

  vit::ParamList<Real> parameters(const std::string& prefix = "probe") const;
  void visit(const std::string& prefix, const vit::ParamVisitor<Real>& fn);
  void set_requires_grad(bool flag);

 private:
  ProbeConfig cfg_;
  BasicTensor<Real> query_;
  vit::Linear<Real> wk_, wv_, wo_;
  vit::Linear<Real> fc1_, fc2_, fc3_;
};

/// Softmax of classify(), as doubles.
std::vector<double> class_probabilities(const AttentiveProbe<float>& probe, const Tensor& tokens);

void add_to_checkpoint(Checkpoint& ckpt, const AttentiveProbe<float>& probe, const std::string& prefix = "probe");
AttentiveProbe<float> load_probe(const Checkpoint& ckpt, const std::string& prefix = "probe");

struct ProbeTrainConfig {
  std::size_t epochs = 20;
  std::size_t clips_per_video = 8;
  std::size_t batch_size = 8;  // clips per optimizer step
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  Pooling pooling = Pooling::Attentive;
  data::AugmentConfig augment = data::AugmentConfig::toy(true);

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_war = 0.0;  // clip-level accuracy over the epoch
};

struct ProbeTrainResult {
  AttentiveProbe<float> probe;
  std::vector<EpochStats> history;
};

/// Frozen-encoder probe training on the training side of one fold. Each epoch
/// visits the training videos in shuffled order, draws clips_per_video random
/// clips per video (every clip carries its video's label), encodes them with
/// recording disabled and takes an AdamW step every batch_size clips.
/// Randomness comes from Rng::derive(seed, fold_index). ProtocolError when the
/// fold leaves no training video or a label is outside `labels`.
ProbeTrainResult train_probe(const vit::Encoder<float>& encoder, const data::Manifest& manifest,
                             data::VideoStore& store, const data::FoldPlan& plan, std::size_t fold_index,
                             const ProbeTrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {});

/// Encodes clips in parallel (no recording); output order matches input.
std::vector<Tensor> encode_clips(const vit::Encoder<float>& encoder, const std::vector<data::FloatClip>& clips);

/// CSV with columns epoch,mean_loss,train_war.
std::string history_csv(const std::vector<EpochStats>& history);

}  // namespace jepa_fer::probe
