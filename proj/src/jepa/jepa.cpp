#include "jepa_fer/jepa/jepa.hpp"

#include <cmath>
#include <sstream>

#include "jepa_fer/error.hpp"
#include "jepa_fer/ops.hpp"
#include "jepa_fer/optimizer.hpp"
#include "jepa_fer/vit/serialize.hpp"

namespace jepa_fer::jepa {

double EmaSchedule::momentum(std::size_t step) const {
  if (total_steps <= 1) return start;
  if (step >= total_steps - 1) return end;
  return start + (end - start) * static_cast<double>(step) / static_cast<double>(total_steps - 1);
}

void EmaSchedule::validate() const {
  if (!(start >= 0 && start <= end && end <= 1)) {
    throw ConfigError("ema schedule needs 0 <= start <= end <= 1");
  }
  if (total_steps == 0) throw ConfigError("ema schedule needs total_steps >= 1");
}

namespace {

vit::Encoder<float> init_encoder(const ModelConfig& cfg, std::uint64_t seed) {
  auto rng = Rng::derive(seed, 0);
  return vit::Encoder<float>(cfg.encoder, rng);
}

vit::Predictor<float> init_predictor(const ModelConfig& cfg, std::uint64_t seed) {
  auto rng = Rng::derive(seed, 1);
  return vit::Predictor<float>(cfg.predictor, cfg.encoder.embed_dim, cfg.encoder.grid(), rng);
}

}  // namespace

JepaModel::JepaModel(const ModelConfig& cfg, std::uint64_t seed)
    : JepaModel(init_encoder(cfg, seed), init_encoder(cfg, seed), init_predictor(cfg, seed)) {}

JepaModel::JepaModel(vit::Encoder<float> online, vit::Encoder<float> target, vit::Predictor<float> predictor)
    : online_(std::move(online)), target_(std::move(target)), predictor_(std::move(predictor)) {
  online_.set_requires_grad(true);
  target_.set_requires_grad(false);
  predictor_.set_requires_grad(true);
}

std::vector<ParamRef> JepaModel::trainable() const {
  std::vector<ParamRef> out;
  for (auto& p : online_.parameters()) out.push_back({p.name, p.tensor, p.decay});
  for (auto& p : predictor_.parameters()) out.push_back({p.name, p.tensor, p.decay});
  return out;
}

Checkpoint JepaModel::to_checkpoint() const {
  Checkpoint ckpt;
  vit::add_to_checkpoint(ckpt, online_, "encoder");
  vit::add_to_checkpoint(ckpt, target_, "target_encoder");
  vit::add_to_checkpoint(ckpt, predictor_, "predictor");
  return ckpt;
}

JepaModel JepaModel::from_checkpoint(const Checkpoint& ckpt) {
  auto online = vit::load_encoder(ckpt, "encoder");
  auto target = vit::load_encoder(ckpt, "target_encoder");
  if (!(online.config().embed_dim == target.config().embed_dim && online.grid() == target.grid() &&
        online.config().depth == target.config().depth)) {
    throw DimensionError("checkpoint: online and target encoders differ in architecture");
  }
  Rng rng(0);
  vit::Predictor<float> predictor(vit::predictor_config_from(ckpt, "predictor"), online.config().embed_dim,
                                  online.grid(), rng);
  vit::load_params(ckpt, predictor.parameters("predictor"));
  return JepaModel(std::move(online), std::move(target), std::move(predictor));
}

namespace {

struct LossParts {
  Tensor loss;
  Tensor context;
};

LossParts loss_parts(const JepaModel& model, const data::FloatClip& clip, const vit::TubeMask& mask) {
  if (!(mask.grid == model.online().grid())) throw DimensionError("jepa_loss: mask grid does not match encoder");
  const auto masked = mask.masked_tokens();
  const auto visible = mask.visible_tokens();
  if (masked.empty()) throw ProtocolError("jepa_loss: mask hides no token");
  if (visible.empty()) throw ProtocolError("jepa_loss: mask hides every token");

  Tensor target;
  {
    NoGradGuard no_grad;
    const auto& enc = model.target();
    target = gather_rows(enc.encode(enc.embed(clip)), std::span<const std::size_t>(masked)).detach();
  }
  const auto tokens = model.online().embed(clip);
  auto context = model.online().encode(tokens, std::span<const std::size_t>(visible));
  auto pred = model.predictor().predict(context, visible, masked);
  return {l1_loss(pred, target), context};
}

}  // namespace

Tensor jepa_loss(const JepaModel& model, const data::FloatClip& clip, const vit::TubeMask& mask) {
  return loss_parts(model, clip, mask).loss;
}

void ema_update(const vit::ParamList<float>& target, const vit::ParamList<float>& online, double m) {
  if (!(m >= 0 && m <= 1)) throw ConfigError("ema momentum must lie in [0, 1]");
  if (target.size() != online.size()) throw DimensionError("ema_update: parameter count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].tensor.shape() != online[i].tensor.shape()) {
      throw DimensionError("ema_update: " + target[i].name + " " + shape_str(target[i].tensor.shape()) +
                           " vs " + online[i].name + " " + shape_str(online[i].tensor.shape()));
    }
    auto dst = Tensor(target[i].tensor).mutable_values();
    const auto src = online[i].tensor.values();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      dst[j] = static_cast<float>(m * static_cast<double>(dst[j]) + (1.0 - m) * static_cast<double>(src[j]));
    }
  }
}

PretrainConfig PretrainConfig::toy() {
  PretrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 2;
  cfg.mask.block_h = cfg.mask.block_w = 2;
  return cfg;
}

void PretrainConfig::validate() const {
  if (steps == 0) throw ConfigError("pretrain: steps must be >= 1");
  if (batch_size == 0) throw ConfigError("pretrain: batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("pretrain: lr must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("pretrain: weight_decay must be >= 0");
  if (!(warmup_fraction >= 0 && warmup_fraction <= 1)) throw ConfigError("pretrain: warmup_fraction outside [0, 1]");
  if (!(mask.ratio > 0 && mask.ratio < 1)) throw ConfigError("pretrain: mask ratio must lie in (0, 1)");
  EmaSchedule{ema_start, ema_end, steps}.validate();
  augment.validate();
}

double scheduled_lr(const PretrainConfig& cfg, std::size_t step) {
  const auto warm = static_cast<std::size_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(cfg.steps)));
  if (step < warm) return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warm);
  return cfg.lr;
}

double token_variance(const Tensor& embeddings) {
  if (embeddings.rank() != 2) throw DimensionError("token_variance expects a 2-D tensor");
  const std::size_t n = embeddings.dim(0), d = embeddings.dim(1);
  const auto v = embeddings.values();
  double total = 0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += v[i * d + j];
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = v[i * d + j] - mean;
      var += diff * diff;
    }
    total += var / static_cast<double>(n);
  }
  return total / static_cast<double>(d);
}

PretrainResult pretrain_run(JepaModel& model, const data::Manifest& manifest, data::VideoStore& store,
                            const PretrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (manifest.records.empty()) throw ProtocolError("pretrain: empty dataset");
  const auto& enc_cfg = model.online().config();
  if (cfg.augment.target_height != enc_cfg.height || cfg.augment.target_width != enc_cfg.width) {
    throw ConfigError("pretrain: clip size does not match the encoder input size");
  }
  std::vector<const data::VideoRecord*> records;
  for (const auto& r : manifest.records) records.push_back(&r);
  store.preload(records);

  const EmaSchedule ema{cfg.ema_start, cfg.ema_end, cfg.steps};
  AdamW opt(model.trainable(), AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  const auto target_params = model.target().parameters();
  const auto online_params = model.online().parameters();
  auto rng = Rng::derive(cfg.seed, 1);
  const auto grid = model.online().grid();

  PretrainResult result;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double lr = scheduled_lr(cfg, step);
    opt.set_lr(lr);
    opt.zero_grad();

    std::vector<Tensor> losses;
    double variance = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& rec = *records[rng.below(records.size())];
      const auto& video = store.get(rec);
      data::ClipSpec spec{rec.id, data::sample_training_clips(video.frames, 1, rng).front()};
      const auto clip = data::extract_and_transform(video, spec, cfg.augment, rng);
      const auto mask = vit::gen_tube_mask(grid, cfg.mask, rng);
      auto parts = loss_parts(model, clip, mask);
      if (b == 0) variance = token_variance(parts.context);
      losses.push_back(parts.loss);
    }
    Tensor loss = losses.front();
    for (std::size_t b = 1; b < losses.size(); ++b) loss = add(loss, losses[b]);
    if (losses.size() > 1) loss = scale(loss, 1.0f / static_cast<float>(losses.size()));

    const double value = loss.item();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "pretrain: non-finite loss at step " << step << " (lr=" << lr << ", loss=" << value << ")";
      throw NumericError(msg.str());
    }
    backward(loss);
    opt.step();
    const double m = ema.momentum(step);
    ema_update(target_params, online_params, m);

    StepLog entry{step, value, m, lr, variance};
    result.log.push_back(entry);
    if (on_step) on_step(entry);
  }
  opt.zero_grad();
  return result;
}

std::string loss_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream out;
  out.precision(9);
  out << "step,loss,momentum\n";
  for (const auto& e : log) out << e.step << ',' << e.loss << ',' << e.momentum << '\n';
  return out.str();
}

}  // namespace jepa_fer::jepa
