#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/error.hpp"
#include "jepa_fer/rng.hpp"
#include "jepa_fer/tensor.hpp"
#include "jepa_fer/vit/tokens.hpp"

namespace jepa_fer::vit {

template <typename Real>
struct NamedParam {
  std::string name;
  BasicTensor<Real> tensor;
  bool decay = true;  // decoupled weight decay applies
};

template <typename Real>
using ParamList = std::vector<NamedParam<Real>>;

/// Visitor over parameter slots: (name, tensor handle, decay flag). Handles
/// may be reassigned, which is how rebind() swaps in external tensors.
template <typename Real>
using ParamVisitor = std::function<void(const std::string&, BasicTensor<Real>&, bool)>;

/// Collects the handles a module exposes through `visit`.
template <typename Module>
auto collect_params(Module& m, const std::string& prefix) {
  using Real = typename Module::value_type;
  ParamList<Real> out;
  m.visit(prefix, [&out](const std::string& name, BasicTensor<Real>& t, bool decay) {
    out.push_back({name, t, decay});
  });
  return out;
}

/// Replaces a module's parameter handles, in `visit` order, by `tensors`.
/// Shapes must match; the new handles are used as-is (not copied).
template <typename Module>
void rebind_params(Module& m, const std::vector<BasicTensor<typename Module::value_type>>& tensors);

/// Copies values parameter-by-parameter; names and shapes must line up.
template <typename To, typename From>
void copy_param_values(const ParamList<From>& src, const ParamList<To>& dst);

template <typename Real>
struct Linear {
  using value_type = Real;
  BasicTensor<Real> weight;  // in x out
  BasicTensor<Real> bias;    // out

  static Linear init(std::size_t in, std::size_t out, Rng& rng, double stddev = 0.02);
  BasicTensor<Real> operator()(const BasicTensor<Real>& x) const;
  void visit(const std::string& prefix, const ParamVisitor<Real>& fn);
};

template <typename Real>
struct LayerNorm {
  using value_type = Real;
  BasicTensor<Real> gain;
  BasicTensor<Real> bias;
  double eps = 1e-6;

  static LayerNorm init(std::size_t dim);
  BasicTensor<Real> operator()(const BasicTensor<Real>& x) const;
  void visit(const std::string& prefix, const ParamVisitor<Real>& fn);
};

/// Called once per attention evaluation with (query count, key count).
using AttentionObserver = std::function<void(std::size_t queries, std::size_t keys)>;

/// softmax(q_h k_h^T / sqrt(d_h)) v_h per head, heads concatenated:
/// q (n x D), k and v (m x D) -> (n x D).
template <typename Real>
BasicTensor<Real> multi_head_attention(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                       const BasicTensor<Real>& v, std::size_t heads,
                                       const AttentionObserver& observer = {});

/// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)) with a
/// GELU MLP.
template <typename Real>
struct Block {
  using value_type = Real;
  LayerNorm<Real> ln1;
  Linear<Real> wq, wk, wv, wo;
  LayerNorm<Real> ln2;
  Linear<Real> fc1, fc2;
  std::size_t heads = 1;

  static Block init(std::size_t dim, std::size_t heads, std::size_t mlp_hidden, Rng& rng);
  BasicTensor<Real> forward(const BasicTensor<Real>& x, const AttentionObserver& observer = {}) const;
  void visit(const std::string& prefix, const ParamVisitor<Real>& fn);
};

struct EncoderConfig {
  std::size_t frames = 16;
  std::size_t height = 64;
  std::size_t width = 64;
  TubeletConfig tubelet;
  std::size_t embed_dim = 128;
  std::size_t depth = 4;
  std::size_t heads = 4;
  double mlp_ratio = 4.0;

  GridShape grid() const;
  std::size_t mlp_hidden() const;
  void validate() const;

  /// 64x64 frames, 8x4x4 = 128 tokens, dim 128, depth 4, 4 heads.
  static EncoderConfig toy();
};

struct PredictorConfig {
  std::size_t dim = 64;
  std::size_t depth = 2;
  std::size_t heads = 4;
  double mlp_ratio = 4.0;

  void validate() const;
};

/// Tubelet embedding + fixed 3-D positions + transformer stack + final norm.
template <typename Real>
class Encoder {
 public:
  using value_type = Real;

  Encoder(const EncoderConfig& cfg, Rng& rng);

  const EncoderConfig& config() const { return cfg_; }
  GridShape grid() const { return cfg_.grid(); }
  const BasicTensor<Real>& positions() const { return pos_; }

  /// Projected tubelets with positions added, (T'H'W') x D.
  BasicTensor<Real> embed(const data::FloatClip& clip) const;
  /// Runs the stack over all tokens, or only over `visible` rows (the other
  /// tokens are dropped, not zeroed). Output has one row per processed token.
  BasicTensor<Real> encode(const BasicTensor<Real>& tokens,
                           std::optional<std::span<const std::size_t>> visible = std::nullopt,
                           const AttentionObserver& observer = {}) const;
  BasicTensor<Real> forward(const data::FloatClip& clip) const { return encode(embed(clip)); }

  ParamList<Real> parameters(const std::string& prefix = "encoder") const;
  void visit(const std::string& prefix, const ParamVisitor<Real>& fn);
  void set_requires_grad(bool flag);

 private:
  EncoderConfig cfg_;
  Linear<Real> patch_embed_;
  std::vector<Block<Real>> blocks_;
  LayerNorm<Real> norm_;
  BasicTensor<Real> pos_;
};

/// Narrow transformer that predicts encoder embeddings at masked positions
/// from context embeddings. Conditioning for each masked slot is the
/// learnable mask token plus that slot's position embedding.
template <typename Real>
class Predictor {
 public:
  using value_type = Real;

  Predictor(const PredictorConfig& cfg, std::size_t encoder_dim, const GridShape& grid, Rng& rng);

  const PredictorConfig& config() const { return cfg_; }

  /// context: one row per entry of `context_positions`. Returns
  /// (|masked| x encoder_dim), rows in ascending token order whatever order
  /// `masked_positions` is given in.
  BasicTensor<Real> predict(const BasicTensor<Real>& context,
                            std::span<const std::size_t> context_positions,
                            std::span<const std::size_t> masked_positions,
                            const AttentionObserver& observer = {}) const;

  ParamList<Real> parameters(const std::string& prefix = "predictor") const;
  void visit(const std::string& prefix, const ParamVisitor<Real>& fn);
  void set_requires_grad(bool flag);

 private:
  PredictorConfig cfg_;
  std::size_t encoder_dim_;
  GridShape grid_;
  Linear<Real> in_proj_;
  BasicTensor<Real> mask_token_;
  std::vector<Block<Real>> blocks_;
  LayerNorm<Real> norm_;
  Linear<Real> out_proj_;
  BasicTensor<Real> pos_;
};

template <typename Module>
void rebind_params(Module& m, const std::vector<BasicTensor<typename Module::value_type>>& tensors) {
  using Real = typename Module::value_type;
  std::size_t i = 0;
  m.visit("", [&](const std::string& name, BasicTensor<Real>& slot, bool) {
    if (i >= tensors.size()) throw DimensionError("rebind: too few tensors at " + name);
    if (tensors[i].shape() != slot.shape()) {
      throw DimensionError("rebind: " + name + " expects " + shape_str(slot.shape()) + ", got " +
                           shape_str(tensors[i].shape()));
    }
    slot = tensors[i++];
  });
  if (i != tensors.size()) throw DimensionError("rebind: too many tensors");
}

/// Same architecture, values copied (possibly across precisions).
template <typename To, typename From>
Encoder<To> convert_encoder(const Encoder<From>& src);
template <typename To, typename From>
Predictor<To> convert_predictor(const Predictor<From>& src, std::size_t encoder_dim, const GridShape& grid);

}  // namespace jepa_fer::vit
