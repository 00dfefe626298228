#pragma once

#include <string>

#include "jepa_fer/checkpoint.hpp"
#include "jepa_fer/vit/transformer.hpp"

namespace jepa_fer::vit {

/// Writes `<prefix>.config` (architecture numbers) plus every parameter under
/// `<prefix>.`, so a checkpoint alone is enough to rebuild the module.
void add_to_checkpoint(Checkpoint& ckpt, const Encoder<float>& encoder, const std::string& prefix = "encoder");
void add_to_checkpoint(Checkpoint& ckpt, const Predictor<float>& predictor,
                       const std::string& prefix = "predictor");

EncoderConfig encoder_config_from(const Checkpoint& ckpt, const std::string& prefix = "encoder");
PredictorConfig predictor_config_from(const Checkpoint& ckpt, const std::string& prefix = "predictor");

/// Rebuilds an encoder from `<prefix>.*`; DimensionError on shape mismatch.
Encoder<float> load_encoder(const Checkpoint& ckpt, const std::string& prefix = "encoder");
/// Copies stored values into an existing module of matching architecture.
void load_params(const Checkpoint& ckpt, const ParamList<float>& params);

}  // namespace jepa_fer::vit
