#include "jepa_fer/vit/serialize.hpp"

#include <cmath>

#include "jepa_fer/error.hpp"

namespace jepa_fer::vit {

namespace {

std::size_t as_count(float v, const std::string& what) {
  if (!(v >= 0) || v != std::floor(v)) throw FormatError("checkpoint: bad " + what + " value");
  return static_cast<std::size_t>(v);
}

void add_params(Checkpoint& ckpt, const ParamList<float>& params) {
  for (const auto& p : params) ckpt.add(p.name, p.tensor);
}

}  // namespace

void add_to_checkpoint(Checkpoint& ckpt, const Encoder<float>& encoder, const std::string& prefix) {
  const auto& c = encoder.config();
  ckpt.add(prefix + ".config",
           Tensor::from_values({10}, {static_cast<float>(c.frames), static_cast<float>(c.height),
                                      static_cast<float>(c.width), static_cast<float>(c.tubelet.patch_t),
                                      static_cast<float>(c.tubelet.patch_h), static_cast<float>(c.tubelet.patch_w),
                                      static_cast<float>(c.embed_dim), static_cast<float>(c.depth),
                                      static_cast<float>(c.heads), static_cast<float>(c.mlp_ratio)}));
  add_params(ckpt, encoder.parameters(prefix));
}

void add_to_checkpoint(Checkpoint& ckpt, const Predictor<float>& predictor, const std::string& prefix) {
  const auto& c = predictor.config();
  ckpt.add(prefix + ".config",
           Tensor::from_values({4}, {static_cast<float>(c.dim), static_cast<float>(c.depth),
                                     static_cast<float>(c.heads), static_cast<float>(c.mlp_ratio)}));
  add_params(ckpt, predictor.parameters(prefix));
}

EncoderConfig encoder_config_from(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& t = ckpt.get(prefix + ".config");
  if (t.numel() != 10) throw FormatError("checkpoint: " + prefix + ".config must hold 10 values");
  EncoderConfig c;
  c.frames = as_count(t.value(0), "frames");
  c.height = as_count(t.value(1), "height");
  c.width = as_count(t.value(2), "width");
  c.tubelet.patch_t = as_count(t.value(3), "patch_t");
  c.tubelet.patch_h = as_count(t.value(4), "patch_h");
  c.tubelet.patch_w = as_count(t.value(5), "patch_w");
  c.embed_dim = as_count(t.value(6), "embed_dim");
  c.depth = as_count(t.value(7), "depth");
  c.heads = as_count(t.value(8), "heads");
  c.mlp_ratio = t.value(9);
  c.validate();
  return c;
}

PredictorConfig predictor_config_from(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& t = ckpt.get(prefix + ".config");
  if (t.numel() != 4) throw FormatError("checkpoint: " + prefix + ".config must hold 4 values");
  PredictorConfig c;
  c.dim = as_count(t.value(0), "dim");
  c.depth = as_count(t.value(1), "depth");
  c.heads = as_count(t.value(2), "heads");
  c.mlp_ratio = t.value(3);
  c.validate();
  return c;
}

void load_params(const Checkpoint& ckpt, const ParamList<float>& params) {
  for (const auto& p : params) {
    auto dst = p.tensor;
    ckpt.load_into(p.name, dst);
  }
}

Encoder<float> load_encoder(const Checkpoint& ckpt, const std::string& prefix) {
  Rng rng(0);
  Encoder<float> enc(encoder_config_from(ckpt, prefix), rng);
  load_params(ckpt, enc.parameters(prefix));
  return enc;
}

}  // namespace jepa_fer::vit
