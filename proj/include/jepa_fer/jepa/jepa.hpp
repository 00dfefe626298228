#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "jepa_fer/checkpoint.hpp"
#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/data/manifest.hpp"
#include "jepa_fer/data/store.hpp"
#include "jepa_fer/optimizer.hpp"
#include "jepa_fer/vit/tokens.hpp"
#include "jepa_fer/vit/transformer.hpp"

namespace jepa_fer::jepa {

/// Target-encoder momentum, linear in the step index: m(0) = start,
/// m(total_steps - 1) = end.
struct EmaSchedule {
  double start = 0.998;
  double end = 1.0;
  std::size_t total_steps = 1;

  double momentum(std::size_t step) const;
  void validate() const;
};

struct ModelConfig {
  vit::EncoderConfig encoder = vit::EncoderConfig::toy();
  vit::PredictorConfig predictor;
};

/// Online encoder, EMA target encoder and predictor. The target starts as a
/// copy of the online encoder and never requires gradients.
class JepaModel {
 public:
  JepaModel(const ModelConfig& cfg, std::uint64_t seed);

  vit::Encoder<float>& online() { return online_; }
  const vit::Encoder<float>& online() const { return online_; }
  vit::Encoder<float>& target() { return target_; }
  const vit::Encoder<float>& target() const { return target_; }
  vit::Predictor<float>& predictor() { return predictor_; }
  const vit::Predictor<float>& predictor() const { return predictor_; }

  /// Online encoder + predictor parameters, the only ones the optimizer sees.
  std::vector<ParamRef> trainable() const;

  /// "encoder.*" (online), "target_encoder.*", "predictor.*".
  Checkpoint to_checkpoint() const;
  static JepaModel from_checkpoint(const Checkpoint& ckpt);

 private:
  JepaModel(vit::Encoder<float> online, vit::Encoder<float> target, vit::Predictor<float> predictor);

  vit::Encoder<float> online_;
  vit::Encoder<float> target_;
  vit::Predictor<float> predictor_;
};

/// Masked latent prediction loss for one clip: the target encoder sees every
/// token (no recording, result detached) and is read at masked positions; the
/// online encoder sees only visible tokens; the predictor fills the masked
/// positions; loss = mean |pred - target|. ProtocolError when the mask leaves
/// no visible or no masked token.
Tensor jepa_loss(const JepaModel& model, const data::FloatClip& clip, const vit::TubeMask& mask);

/// target <- m * target + (1 - m) * online, element by element, off the tape.
void ema_update(const vit::ParamList<float>& target, const vit::ParamList<float>& online, double m);

struct PretrainConfig {
  std::size_t steps = 200;
  std::size_t batch_size = 1;  // clips per step, one mask each
  double lr = 1e-4;
  double weight_decay = 0.05;
  double warmup_fraction = 0.1;
  vit::MaskConfig mask;
  double ema_start = 0.998;
  double ema_end = 1.0;
  std::uint64_t seed = 0;
  data::AugmentConfig augment = data::AugmentConfig::toy(true);

  /// Desk-scale preset for the toy encoder: lr 1e-3, 2 clips per step,
  /// 2x2 mask blocks (4x4 blocks would cover the whole 4x4 grid).
  static PretrainConfig toy();

  void validate() const;
};

/// Linear warmup over the first warmup_fraction of steps, constant after.
double scheduled_lr(const PretrainConfig& cfg, std::size_t step);

struct StepLog {
  std::size_t step = 0;
  double loss = 0.0;
  double momentum = 0.0;
  double lr = 0.0;
  double token_variance = 0.0;  // collapse witness, see token_variance()
};

/// Mean over feature dimensions of the across-token variance of the
/// embeddings; near zero when every token maps to the same vector.
double token_variance(const Tensor& embeddings);

struct PretrainResult {
  std::vector<StepLog> log;
};

using StepCallback = std::function<void(const StepLog&)>;

/// Per step: draw batch_size (video, clip start, crop, mask) samples, average
/// their jepa_loss, AdamW step on online encoder + predictor, then EMA update
/// of the target with the scheduled momentum. NumericError (with step, lr and
/// loss) on a non-finite loss.
PretrainResult pretrain_run(JepaModel& model, const data::Manifest& manifest, data::VideoStore& store,
                            const PretrainConfig& cfg, const StepCallback& on_step = {});

/// CSV with columns step,loss,momentum.
std::string loss_log_csv(const std::vector<StepLog>& log);

}  // namespace jepa_fer::jepa
