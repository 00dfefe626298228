#include "jepa_fer/vit/transformer.hpp"

#include <algorithm>
#include <cmath>

#include "jepa_fer/error.hpp"
#include "jepa_fer/ops.hpp"

namespace jepa_fer::vit {

template <typename To, typename From>
void copy_param_values(const ParamList<From>& src, const ParamList<To>& dst) {
  if (src.size() != dst.size()) {
    throw DimensionError("parameter count mismatch: " + std::to_string(src.size()) + " vs " +
                         std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].tensor.shape() != dst[i].tensor.shape()) {
      throw DimensionError("parameter " + src[i].name + " " + shape_str(src[i].tensor.shape()) +
                           " does not match " + dst[i].name + " " + shape_str(dst[i].tensor.shape()));
    }
    auto out = BasicTensor<To>(dst[i].tensor).mutable_values();
    const auto in = src[i].tensor.values();
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = static_cast<To>(in[j]);
  }
}

template <typename Real>
Linear<Real> Linear<Real>::init(std::size_t in, std::size_t out, Rng& rng, double stddev) {
  return {BasicTensor<Real>::randn({in, out}, rng, stddev), BasicTensor<Real>::zeros({out})};
}

template <typename Real>
BasicTensor<Real> Linear<Real>::operator()(const BasicTensor<Real>& x) const {
  return affine(x, weight, bias);
}

template <typename Real>
void Linear<Real>::visit(const std::string& prefix, const ParamVisitor<Real>& fn) {
  fn(prefix + ".weight", weight, true);
  fn(prefix + ".bias", bias, false);
}

template <typename Real>
LayerNorm<Real> LayerNorm<Real>::init(std::size_t dim) {
  return {BasicTensor<Real>::full({dim}, Real(1)), BasicTensor<Real>::zeros({dim}), 1e-6};
}

template <typename Real>
BasicTensor<Real> LayerNorm<Real>::operator()(const BasicTensor<Real>& x) const {
  return layer_norm(x, gain, bias, eps);
}

template <typename Real>
void LayerNorm<Real>::visit(const std::string& prefix, const ParamVisitor<Real>& fn) {
  fn(prefix + ".gain", gain, false);
  fn(prefix + ".bias", bias, false);
}

template <typename Real>
BasicTensor<Real> multi_head_attention(const BasicTensor<Real>& q, const BasicTensor<Real>& k,
                                       const BasicTensor<Real>& v, std::size_t heads,
                                       const AttentionObserver& observer) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || k.shape() != v.shape() || q.dim(1) != k.dim(1)) {
    throw DimensionError("attention: incompatible q/k/v shapes " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const std::size_t dim = q.dim(1);
  if (heads == 0 || dim % heads) throw ConfigError("attention: dim not divisible by heads");
  const std::size_t dh = dim / heads;
  const Real scale_factor = Real(1) / std::sqrt(static_cast<Real>(dh));
  if (observer) observer(q.dim(0), k.dim(0));
  std::vector<BasicTensor<Real>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * dh, dh);
    auto kh = slice_cols(k, h * dh, dh);
    auto vh = slice_cols(v, h * dh, dh);
    auto scores = scale(matmul(qh, transpose(kh)), scale_factor);
    outs.push_back(matmul(softmax(scores, 1), vh));
  }
  return heads == 1 ? outs.front() : concat_cols(outs);
}

template <typename Real>
Block<Real> Block<Real>::init(std::size_t dim, std::size_t heads, std::size_t mlp_hidden, Rng& rng) {
  Block b;
  b.ln1 = LayerNorm<Real>::init(dim);
  b.wq = Linear<Real>::init(dim, dim, rng);
  b.wk = Linear<Real>::init(dim, dim, rng);
  b.wv = Linear<Real>::init(dim, dim, rng);
  b.wo = Linear<Real>::init(dim, dim, rng);
  b.ln2 = LayerNorm<Real>::init(dim);
  b.fc1 = Linear<Real>::init(dim, mlp_hidden, rng);
  b.fc2 = Linear<Real>::init(mlp_hidden, dim, rng);
  b.heads = heads;
  return b;
}

template <typename Real>
BasicTensor<Real> Block<Real>::forward(const BasicTensor<Real>& x, const AttentionObserver& observer) const {
  const auto h = ln1(x);
  const auto attn = multi_head_attention(wq(h), wk(h), wv(h), heads, observer);
  const auto x1 = add(x, wo(attn));
  return add(x1, fc2(gelu(fc1(ln2(x1)))));
}

template <typename Real>
void Block<Real>::visit(const std::string& prefix, const ParamVisitor<Real>& fn) {
  ln1.visit(prefix + ".ln1", fn);
  wq.visit(prefix + ".attn.wq", fn);
  wk.visit(prefix + ".attn.wk", fn);
  wv.visit(prefix + ".attn.wv", fn);
  wo.visit(prefix + ".attn.wo", fn);
  ln2.visit(prefix + ".ln2", fn);
  fc1.visit(prefix + ".mlp.fc1", fn);
  fc2.visit(prefix + ".mlp.fc2", fn);
}

GridShape EncoderConfig::grid() const { return grid_for(frames, height, width, tubelet); }

std::size_t EncoderConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(embed_dim)));
}

void EncoderConfig::validate() const {
  grid();
  if (embed_dim == 0 || heads == 0 || embed_dim % heads) {
    throw ConfigError("encoder: embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (!(mlp_ratio > 0)) throw ConfigError("encoder: mlp_ratio must be positive");
}

EncoderConfig EncoderConfig::toy() { return EncoderConfig{}; }

void PredictorConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads) {
    throw ConfigError("predictor: dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (!(mlp_ratio > 0)) throw ConfigError("predictor: mlp_ratio must be positive");
}

template <typename Real>
Encoder<Real>::Encoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  patch_embed_ = Linear<Real>::init(cfg_.tubelet.patch_volume(), cfg_.embed_dim, rng);
  for (std::size_t i = 0; i < cfg_.depth; ++i) {
    blocks_.push_back(Block<Real>::init(cfg_.embed_dim, cfg_.heads, cfg_.mlp_hidden(), rng));
  }
  norm_ = LayerNorm<Real>::init(cfg_.embed_dim);
  pos_ = posembed_3d<Real>(cfg_.grid(), cfg_.embed_dim);
}

template <typename Real>
BasicTensor<Real> Encoder<Real>::embed(const data::FloatClip& clip) const {
  if (clip.frames != cfg_.frames || clip.height != cfg_.height || clip.width != cfg_.width) {
    throw DimensionError("encoder expects " + std::to_string(cfg_.frames) + "x" + std::to_string(cfg_.height) +
                         "x" + std::to_string(cfg_.width) + " clips, got " + std::to_string(clip.frames) +
                         "x" + std::to_string(clip.height) + "x" + std::to_string(clip.width));
  }
  auto patches = extract_tubelets<Real>(clip, cfg_.tubelet);
  return add(patch_embed_(patches), pos_);
}

template <typename Real>
BasicTensor<Real> Encoder<Real>::encode(const BasicTensor<Real>& tokens,
                                        std::optional<std::span<const std::size_t>> visible,
                                        const AttentionObserver& observer) const {
  BasicTensor<Real> x = tokens;
  if (visible) {
    if (visible->empty()) throw ProtocolError("encode: empty visible token set");
    x = gather_rows(tokens, *visible);
  }
  if (x.rank() != 2 || x.dim(1) != cfg_.embed_dim) {
    throw DimensionError("encode: tokens " + shape_str(x.shape()) + " do not match embed_dim " +
                         std::to_string(cfg_.embed_dim));
  }
  if (blocks_.empty()) return x;
  for (const auto& b : blocks_) x = b.forward(x, observer);
  return norm_(x);
}

template <typename Real>
ParamList<Real> Encoder<Real>::parameters(const std::string& prefix) const {
  // Handles share storage, so collecting through a mutable view is harmless.
  return collect_params(const_cast<Encoder&>(*this), prefix);
}

template <typename Real>
void Encoder<Real>::visit(const std::string& prefix, const ParamVisitor<Real>& fn) {
  patch_embed_.visit(prefix + ".patch_embed", fn);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit(prefix + ".block" + std::to_string(i), fn);
  norm_.visit(prefix + ".norm", fn);
}

template <typename Real>
void Encoder<Real>::set_requires_grad(bool flag) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(flag);
}

template <typename Real>
Predictor<Real>::Predictor(const PredictorConfig& cfg, std::size_t encoder_dim, const GridShape& grid, Rng& rng)
    : cfg_(cfg), encoder_dim_(encoder_dim), grid_(grid) {
  cfg_.validate();
  in_proj_ = Linear<Real>::init(encoder_dim, cfg_.dim, rng);
  mask_token_ = BasicTensor<Real>::randn({1, cfg_.dim}, rng, 0.02);
  const auto hidden = static_cast<std::size_t>(std::lround(cfg_.mlp_ratio * static_cast<double>(cfg_.dim)));
  for (std::size_t i = 0; i < cfg_.depth; ++i) blocks_.push_back(Block<Real>::init(cfg_.dim, cfg_.heads, hidden, rng));
  norm_ = LayerNorm<Real>::init(cfg_.dim);
  out_proj_ = Linear<Real>::init(cfg_.dim, encoder_dim, rng);
  pos_ = posembed_3d<Real>(grid, cfg_.dim);
}

template <typename Real>
BasicTensor<Real> Predictor<Real>::predict(const BasicTensor<Real>& context,
                                           std::span<const std::size_t> context_positions,
                                           std::span<const std::size_t> masked_positions,
                                           const AttentionObserver& observer) const {
  if (masked_positions.empty()) throw ProtocolError("predict: no masked positions requested");
  if (context_positions.empty()) throw ProtocolError("predict: empty context");
  if (context.rank() != 2 || context.dim(0) != context_positions.size() || context.dim(1) != encoder_dim_) {
    throw DimensionError("predict: context " + shape_str(context.shape()) + " does not match " +
                         std::to_string(context_positions.size()) + " positions of dim " +
                         std::to_string(encoder_dim_));
  }
  std::vector<std::size_t> masked(masked_positions.begin(), masked_positions.end());
  std::sort(masked.begin(), masked.end());
  if (std::adjacent_find(masked.begin(), masked.end()) != masked.end()) {
    throw ProtocolError("predict: duplicate masked position");
  }
  std::vector<std::size_t> ctx_sorted(context_positions.begin(), context_positions.end());
  std::sort(ctx_sorted.begin(), ctx_sorted.end());
  for (auto p : masked) {
    if (p >= grid_.tokens()) throw IndexError("predict: masked position out of range");
    if (std::binary_search(ctx_sorted.begin(), ctx_sorted.end(), p)) {
      throw ProtocolError("predict: position " + std::to_string(p) + " is both context and masked");
    }
  }
  const auto ctx = add(in_proj_(context), gather_rows(pos_, context_positions));
  const auto queries =
      add(expand_rows(mask_token_, masked.size()), gather_rows(pos_, std::span<const std::size_t>(masked)));
  auto x = concat_rows<Real>({ctx, queries});
  for (const auto& b : blocks_) x = b.forward(x, observer);
  x = norm_(x);
  std::vector<std::size_t> tail(masked.size());
  for (std::size_t i = 0; i < tail.size(); ++i) tail[i] = context_positions.size() + i;
  return out_proj_(gather_rows(x, std::span<const std::size_t>(tail)));
}

template <typename Real>
ParamList<Real> Predictor<Real>::parameters(const std::string& prefix) const {
  return collect_params(const_cast<Predictor&>(*this), prefix);
}

template <typename Real>
void Predictor<Real>::visit(const std::string& prefix, const ParamVisitor<Real>& fn) {
  in_proj_.visit(prefix + ".in_proj", fn);
  fn(prefix + ".mask_token", mask_token_, false);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit(prefix + ".block" + std::to_string(i), fn);
  norm_.visit(prefix + ".norm", fn);
  out_proj_.visit(prefix + ".out_proj", fn);
}

template <typename Real>
void Predictor<Real>::set_requires_grad(bool flag) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(flag);
}

template <typename To, typename From>
Encoder<To> convert_encoder(const Encoder<From>& src) {
  Rng rng(0);
  Encoder<To> out(src.config(), rng);
  copy_param_values<To, From>(src.parameters(), out.parameters());
  return out;
}

template <typename To, typename From>
Predictor<To> convert_predictor(const Predictor<From>& src, std::size_t encoder_dim, const GridShape& grid) {
  Rng rng(0);
  Predictor<To> out(src.config(), encoder_dim, grid, rng);
  copy_param_values<To, From>(src.parameters(), out.parameters());
  return out;
}

template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Block<float>;
template struct Block<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Predictor<float>;
template class Predictor<double>;
template BasicTensor<float> multi_head_attention(const BasicTensor<float>&, const BasicTensor<float>&,
                                                 const BasicTensor<float>&, std::size_t,
                                                 const AttentionObserver&);
template BasicTensor<double> multi_head_attention(const BasicTensor<double>&, const BasicTensor<double>&,
                                                  const BasicTensor<double>&, std::size_t,
                                                  const AttentionObserver&);
template void copy_param_values<float, float>(const ParamList<float>&, const ParamList<float>&);
template void copy_param_values<double, float>(const ParamList<float>&, const ParamList<double>&);
template void copy_param_values<float, double>(const ParamList<double>&, const ParamList<float>&);
template void copy_param_values<double, double>(const ParamList<double>&, const ParamList<double>&);
template Encoder<float> convert_encoder<float, float>(const Encoder<float>&);
template Encoder<double> convert_encoder<double, float>(const Encoder<float>&);
template Encoder<float> convert_encoder<float, double>(const Encoder<double>&);
template Predictor<float> convert_predictor<float, float>(const Predictor<float>&, std::size_t, const GridShape&);
template Predictor<double> convert_predictor<double, float>(const Predictor<float>&, std::size_t, const GridShape&);

}  // namespace jepa_fer::vit
