#include "jepa_fer/checks.hpp"

#include <algorithm>

#include "jepa_fer/ops.hpp"
#include "jepa_fer/probe/probe.hpp"
#include "jepa_fer/vit/transformer.hpp"

namespace jepa_fer {

namespace {

vit::EncoderConfig tiny_encoder() {
  vit::EncoderConfig c;
  c.frames = 4;
  c.height = 16;
  c.width = 16;
  c.tubelet = {2, 8, 8};
  c.embed_dim = 12;
  c.depth = 2;
  c.heads = 2;
  c.mlp_ratio = 2.0;
  return c;
}

data::FloatClip random_clip(const vit::EncoderConfig& c, Rng& rng) {
  data::FloatClip clip{c.frames, c.height, c.width, {}};
  clip.data.resize(c.frames * c.height * c.width * 3);
  for (auto& v : clip.data) v = static_cast<float>(rng.normal());
  return clip;
}

template <typename Module>
std::vector<Tensor64> param_values(const Module& m) {
  std::vector<Tensor64> out;
  for (const auto& p : m.parameters("p")) out.push_back(p.tensor.detach());
  return out;
}

/// Parameters get a little extra spread so layer-norm gains, biases and the
/// zero-initialized biases all take part non-trivially.
void jitter(std::vector<Tensor64>& params, Rng& rng) {
  for (auto& t : params) {
    for (auto& v : t.mutable_values()) v += 0.1 * rng.normal();
  }
}

GradCheckResult check_encoder_probe(std::uint64_t seed, std::size_t trials, double tol) {
  GradCheckResult r{"encoder2_probe", 0.0, trials, tol, true};
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = Rng::derive(seed, 100 + t);
    const auto cfg = tiny_encoder();
    vit::Encoder<double> enc(cfg, rng);
    probe::AttentiveProbe<double> head({cfg.embed_dim, cfg.heads, 3, 0, probe::Pooling::Attentive}, rng);
    const auto clip = random_clip(cfg, rng);
    const auto label = static_cast<std::size_t>(rng.below(3));
    auto inputs = param_values(enc);
    const auto n_enc = inputs.size();
    for (auto& p : param_values(head)) inputs.push_back(p);
    jitter(inputs, rng);
    ScalarFn64 fn = [=](const std::vector<Tensor64>& in) mutable {
      vit::rebind_params(enc, std::vector<Tensor64>(in.begin(), in.begin() + n_enc));
      vit::rebind_params(head, std::vector<Tensor64>(in.begin() + n_enc, in.end()));
      return cross_entropy(head.classify(enc.forward(clip)), label);
    };
    r.max_rel_error = std::max(r.max_rel_error, gradcheck_rel_error(fn, inputs, 1e-5));
  }
  r.passed = r.max_rel_error < tol;
  return r;
}

GradCheckResult check_encoder_predictor(std::uint64_t seed, std::size_t trials, double tol) {
  GradCheckResult r{"encoder2_predictor", 0.0, trials, tol, true};
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = Rng::derive(seed, 200 + t);
    const auto cfg = tiny_encoder();
    vit::Encoder<double> enc(cfg, rng);
    vit::Predictor<double> pred({8, 1, 2, 2.0}, cfg.embed_dim, cfg.grid(), rng);
    const auto clip = random_clip(cfg, rng);
    const std::vector<std::size_t> visible{0, 2, 3, 5, 6};
    const std::vector<std::size_t> masked{1, 4, 7};
    // Targets sit well away from the predictions so |pred - target| stays
    // clear of the L1 kink under the finite-difference step.
    auto target = Tensor64::zeros({masked.size(), cfg.embed_dim});
    auto inputs = param_values(enc);
    const auto n_enc = inputs.size();
    for (auto& p : param_values(pred)) inputs.push_back(p);
    jitter(inputs, rng);
    {
      vit::rebind_params(enc, std::vector<Tensor64>(inputs.begin(), inputs.begin() + n_enc));
      vit::rebind_params(pred, std::vector<Tensor64>(inputs.begin() + n_enc, inputs.end()));
      NoGradGuard no_grad;
      const auto p0 = pred.predict(enc.encode(enc.embed(clip), std::span<const std::size_t>(visible)), visible, masked);
      auto tv = target.mutable_values();
      for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = p0.value(i) + ((i % 2) ? 0.5 : -0.5);
    }
    ScalarFn64 fn = [=](const std::vector<Tensor64>& in) mutable {
      vit::rebind_params(enc, std::vector<Tensor64>(in.begin(), in.begin() + n_enc));
      vit::rebind_params(pred, std::vector<Tensor64>(in.begin() + n_enc, in.end()));
      const auto ctx = enc.encode(enc.embed(clip), std::span<const std::size_t>(visible));
      return l1_loss(pred.predict(ctx, visible, masked), target);
    };
    r.max_rel_error = std::max(r.max_rel_error, gradcheck_rel_error(fn, inputs, 1e-5));
  }
  r.passed = r.max_rel_error < tol;
  return r;
}

}  // namespace

std::vector<GradCheckResult> model_gradcheck_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  return {check_encoder_probe(seed, trials, tolerance), check_encoder_predictor(seed, trials, tolerance)};
}

}  // namespace jepa_fer
