#include "jepa_fer/probe/probe.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "jepa_fer/error.hpp"
#include "jepa_fer/ops.hpp"
#include "jepa_fer/optimizer.hpp"
#include "jepa_fer/parallel.hpp"

namespace jepa_fer::probe {

std::string to_string(Pooling pooling) { return pooling == Pooling::Attentive ? "attentive" : "average"; }

Pooling parse_pooling(const std::string& text) {
  if (text == "attentive") return Pooling::Attentive;
  if (text == "average") return Pooling::Average;
  throw ConfigError("unknown pooling '" + text + "' (expected attentive or average)");
}

void ProbeConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads) {
    throw ConfigError("probe: dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  }
  if (classes < 2) throw ConfigError("probe: need at least 2 classes");
}

namespace {

template <typename Real>
vit::Linear<Real> scaled_linear(std::size_t in, std::size_t out, Rng& rng) {
  return vit::Linear<Real>::init(in, out, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

}  // namespace

template <typename Real>
AttentiveProbe<Real>::AttentiveProbe(const ProbeConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto d = cfg_.dim, h = cfg_.mlp_hidden();
  if (cfg_.pooling == Pooling::Attentive) {
    query_ = BasicTensor<Real>::randn({1, d}, rng, 0.02);
    wk_ = scaled_linear<Real>(d, d, rng);
    wv_ = scaled_linear<Real>(d, d, rng);
    wo_ = scaled_linear<Real>(d, d, rng);
  }
  fc1_ = scaled_linear<Real>(d, h, rng);
  fc2_ = scaled_linear<Real>(h, h, rng);
  fc3_ = scaled_linear<Real>(h, cfg_.classes, rng);
}

template <typename Real>
BasicTensor<Real> AttentiveProbe<Real>::pool(const BasicTensor<Real>& tokens) const {
  if (tokens.rank() != 2 || tokens.dim(1) != cfg_.dim) {
    throw DimensionError("probe: tokens " + shape_str(tokens.shape()) + " do not match dim " +
                         std::to_string(cfg_.dim));
  }
  if (cfg_.pooling == Pooling::Average) return mean_rows(tokens);
  return wo_(vit::multi_head_attention(query_, wk_(tokens), wv_(tokens), cfg_.heads));
}

template <typename Real>
BasicTensor<Real> AttentiveProbe<Real>::classify(const BasicTensor<Real>& tokens) const {
  return fc3_(gelu(fc2_(gelu(fc1_(pool(tokens))))));
}

template <typename Real>
vit::ParamList<Real> AttentiveProbe<Real>::parameters(const std::string& prefix) const {
  return vit::collect_params(const_cast<AttentiveProbe&>(*this), prefix);
}

template <typename Real>
void AttentiveProbe<Real>::visit(const std::string& prefix, const vit::ParamVisitor<Real>& fn) {
  if (cfg_.pooling == Pooling::Attentive) {
    fn(prefix + ".query", query_, false);
    wk_.visit(prefix + ".attn.wk", fn);
    wv_.visit(prefix + ".attn.wv", fn);
    wo_.visit(prefix + ".attn.wo", fn);
  }
  fc1_.visit(prefix + ".mlp.fc1", fn);
  fc2_.visit(prefix + ".mlp.fc2", fn);
  fc3_.visit(prefix + ".mlp.fc3", fn);
}

template <typename Real>
void AttentiveProbe<Real>::set_requires_grad(bool flag) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(flag);
}

template class AttentiveProbe<float>;
template class AttentiveProbe<double>;

std::vector<double> class_probabilities(const AttentiveProbe<float>& probe, const Tensor& tokens) {
  NoGradGuard no_grad;
  const auto p = softmax(probe.classify(tokens), 1);
  return {p.values().begin(), p.values().end()};
}

void add_to_checkpoint(Checkpoint& ckpt, const AttentiveProbe<float>& probe, const std::string& prefix) {
  const auto& c = probe.config();
  ckpt.add(prefix + ".config",
           Tensor::from_values({5}, {static_cast<float>(c.dim), static_cast<float>(c.heads),
                                     static_cast<float>(c.classes), static_cast<float>(c.mlp_hidden()),
                                     c.pooling == Pooling::Attentive ? 0.0f : 1.0f}));
  for (const auto& p : probe.parameters(prefix)) ckpt.add(p.name, p.tensor);
}

AttentiveProbe<float> load_probe(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& t = ckpt.get(prefix + ".config");
  if (t.numel() != 5) throw FormatError("checkpoint: " + prefix + ".config must hold 5 values");
  for (auto v : t.values()) {
    if (!(v >= 0) || v != std::floor(v)) throw FormatError("checkpoint: bad " + prefix + ".config value");
  }
  ProbeConfig cfg;
  cfg.dim = static_cast<std::size_t>(t.value(0));
  cfg.heads = static_cast<std::size_t>(t.value(1));
  cfg.classes = static_cast<std::size_t>(t.value(2));
  cfg.hidden = static_cast<std::size_t>(t.value(3));
  if (t.value(4) > 1) throw FormatError("checkpoint: unknown pooling code in " + prefix + ".config");
  cfg.pooling = t.value(4) == 0 ? Pooling::Attentive : Pooling::Average;
  Rng rng(0);
  AttentiveProbe<float> probe(cfg, rng);
  for (const auto& p : probe.parameters(prefix)) {
    auto dst = p.tensor;
    ckpt.load_into(p.name, dst);
  }
  return probe;
}

void ProbeTrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("probe: epochs must be >= 1");
  if (clips_per_video == 0) throw ConfigError("probe: clips_per_video must be >= 1");
  if (batch_size == 0) throw ConfigError("probe: batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("probe: lr must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("probe: weight_decay must be >= 0");
  augment.validate();
}

std::vector<Tensor> encode_clips(const vit::Encoder<float>& encoder, const std::vector<data::FloatClip>& clips) {
  std::vector<Tensor> out(clips.size());
  parallel_for(0, clips.size(), 1, [&](std::size_t lo, std::size_t hi) {
    NoGradGuard no_grad;
    for (std::size_t i = lo; i < hi; ++i) out[i] = encoder.forward(clips[i]);
  });
  return out;
}

namespace {

struct ClipItem {
  const data::VideoRecord* record;
  std::size_t start;
  std::size_t label;
};

std::size_t argmax(std::span<const float> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

ProbeTrainResult train_probe(const vit::Encoder<float>& encoder, const data::Manifest& manifest,
                             data::VideoStore& store, const data::FoldPlan& plan, std::size_t fold_index,
                             const ProbeTrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
  cfg.validate();
  if (fold_index >= plan.folds.size()) {
    throw IndexError("fold " + std::to_string(fold_index) + " out of range for a " +
                     std::to_string(plan.folds.size()) + "-fold plan");
  }
  const auto& enc_cfg = encoder.config();
  if (cfg.augment.target_height != enc_cfg.height || cfg.augment.target_width != enc_cfg.width) {
    throw ConfigError("probe: clip size does not match the encoder input size");
  }
  const auto split = data::split_fold(manifest, plan, fold_index);
  if (split.train.empty()) throw ProtocolError("fold " + std::to_string(fold_index) + " has no training videos");
  const auto labels = manifest.label_set();
  std::vector<std::size_t> label_of(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) label_of[i] = labels.index_of(split.train[i]->label);
  store.preload(split.train);

  auto rng = Rng::derive(cfg.seed, fold_index);
  ProbeConfig pcfg{enc_cfg.embed_dim, enc_cfg.heads, labels.size(), 0, cfg.pooling};
  AttentiveProbe<float> probe(pcfg, rng);
  probe.set_requires_grad(true);
  std::vector<ParamRef> refs;
  for (auto& p : probe.parameters()) refs.push_back({p.name, p.tensor, p.decay});
  AdamW opt(refs, AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::unordered_set<const detail::TensorImpl<float>*> frozen;
  for (const auto& p : encoder.parameters()) frozen.insert(p.tensor.impl().get());

  std::vector<EpochStats> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<ClipItem> items;
    for (auto v : order) {
      const auto* rec = split.train[v];
      for (auto s : data::sample_training_clips(store.get(*rec).frames, cfg.clips_per_video, rng)) {
        items.push_back({rec, s, label_of[v]});
      }
    }

    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b0 = 0; b0 < items.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(items.size(), b0 + cfg.batch_size);
      std::vector<data::FloatClip> clips;
      for (std::size_t i = b0; i < b1; ++i) {
        const data::ClipSpec spec{items[i].record->id, items[i].start};
        clips.push_back(data::extract_and_transform(store.get(*items[i].record), spec, cfg.augment, rng));
      }
      const auto features = encode_clips(encoder, clips);

      opt.zero_grad();
      Tensor loss;
      for (std::size_t i = 0; i < features.size(); ++i) {
        const auto logits = probe.classify(features[i]);
        if (argmax(logits.values()) == items[b0 + i].label) ++correct;
        const auto ce = cross_entropy(logits, items[b0 + i].label);
        loss = loss.defined() ? add(loss, ce) : ce;
      }
      loss = scale(loss, 1.0f / static_cast<float>(features.size()));
      loss_sum += loss.item() * static_cast<double>(features.size());
      if (!std::isfinite(loss.item())) {
        throw NumericError("probe: non-finite loss in epoch " + std::to_string(epoch));
      }
      // Structural freeze check: no encoder tensor may feed the loss graph.
      for (const auto* leaf : Tape::record(loss).leaves()) {
        if (frozen.count(leaf)) throw UsageError("probe: frozen encoder parameter reached the loss graph");
      }
      backward(loss);
      opt.step();
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(items.size()),
                     static_cast<double>(correct) / static_cast<double>(items.size())};
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  opt.zero_grad();
  probe.set_requires_grad(false);
  return {std::move(probe), std::move(history)};
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,mean_loss,train_war\n";
  for (const auto& e : history) out << e.epoch << ',' << e.mean_loss << ',' << e.train_war << '\n';
  return out.str();
}

}  // namespace jepa_fer::probe
