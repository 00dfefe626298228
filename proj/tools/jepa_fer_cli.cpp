// jepa-fer: dataset generation, pre-training, probing and evaluation runs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "jepa_fer/checkpoint.hpp"
#include "jepa_fer/checks.hpp"
#include "jepa_fer/data/folds.hpp"
#include "jepa_fer/data/synth.hpp"
#include "jepa_fer/error.hpp"
#include "jepa_fer/eval/protocol.hpp"
#include "jepa_fer/eval/report.hpp"
#include "jepa_fer/gradcheck.hpp"
#include "jepa_fer/io.hpp"
#include "jepa_fer/jepa/jepa.hpp"
#include "jepa_fer/probe/probe.hpp"
#include "jepa_fer/vit/serialize.hpp"

namespace fs = std::filesystem;
using namespace jepa_fer;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDataError = 2, kNumericError = 3 };

struct ModelArgs {
  std::size_t frame_size = 64;
  std::size_t dim = 128;
  std::size_t depth = 4;
  std::size_t heads = 4;
  double mlp_ratio = 4.0;
  std::size_t pred_dim = 64;
  std::size_t pred_depth = 2;
  std::size_t pred_heads = 4;

  vit::EncoderConfig encoder() const {
    vit::EncoderConfig c;
    c.height = c.width = frame_size;
    c.embed_dim = dim;
    c.depth = depth;
    c.heads = heads;
    c.mlp_ratio = mlp_ratio;
    return c;
  }
  vit::PredictorConfig predictor() const { return {pred_dim, pred_depth, pred_heads, mlp_ratio}; }
};

void add_encoder_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--frame-size", m.frame_size, "Square clip side in pixels (multiple of 16)");
  cmd->add_option("--dim", m.dim, "Encoder width");
  cmd->add_option("--depth", m.depth, "Encoder blocks");
  cmd->add_option("--heads", m.heads, "Encoder attention heads");
  cmd->add_option("--mlp-ratio", m.mlp_ratio, "MLP hidden width / model width");
}

struct Args {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  ModelArgs model;

  // gen-synth
  data::SynthConfig synth;
  std::size_t size = 64;
  std::string like = "synth";

  // pretrain
  std::string manifest;
  jepa::PretrainConfig pretrain;
  std::size_t mask_block = 2;

  // train-probe
  std::string encoder = "random";
  std::string encoder_key = "target_encoder";
  std::string folds;
  std::string fold_source = "auto";
  std::uint64_t fold_seed = 0;
  std::size_t k = 5;
  int fold = -1;
  probe::ProbeTrainConfig probe;
  std::string pooling = "attentive";

  // eval / cross-eval
  std::string probes;
  std::string voting = "both";
  std::string mode = "both";
  std::size_t stride = 1;

  // gradcheck
  std::size_t trials = 20;
  double tolerance = 1e-4;

  // splits-verify
  std::string plan = "table";
};

void write_text(const fs::path& path, const std::string& text) { io::atomic_write(path, text); }

fs::path output_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  const fs::path dir(out);
  if (!fs::is_directory(dir)) throw IoError("output directory " + dir.string() + " does not exist");
  return dir;
}

/// Every option of `cmd` except help/config, with its effective value.
std::string resolved_config(const CLI::App* cmd) {
  std::ostringstream out;
  out << "# resolved " << cmd->get_name() << " configuration\n";
  for (const auto* opt : cmd->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help" || names.front() == "config") continue;
    std::string value = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
    out << names.front() << " = " << value << "\n";
  }
  return out.str();
}

std::vector<eval::Voting> votings(const std::string& text) {
  if (text == "both") return {eval::Voting::Mv, eval::Voting::Pbv};
  return {eval::parse_voting(text)};
}

std::vector<eval::HarmonizationMode> modes(const std::string& text) {
  if (text == "both") return {eval::HarmonizationMode::DropOnly, eval::HarmonizationMode::MergeCalmNeutral};
  return {eval::parse_mode(text)};
}

std::string checksum_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int cmd_gen_synth(Args& a) {
  const auto dir = output_dir(a.out);
  a.synth.seed = a.seed;
  a.synth.height = a.synth.width = a.size;
  a.synth.like = data::parse_dataset_tag(a.like == "synth" ? "SYNTH" : a.like == "ravdess" ? "RAVDESS"
                                                                     : a.like == "cremad"  ? "CREMAD"
                                                                                           : a.like);
  const auto manifest = data::gen_synthetic(a.synth, dir);
  const auto plan = data::make_folds(manifest, a.synth.folds, data::FoldSource::Generated, a.seed);
  plan.save(dir / "folds.json");
  std::cout << "manifest: " << (dir / "manifest.csv").string() << "\n"
            << "videos: " << manifest.records.size() << ", subjects: " << manifest.subjects().size()
            << ", classes: " << manifest.label_set().size() << "\n";
  return kOk;
}

int cmd_pretrain(Args& a) {
  const auto dir = output_dir(a.out);
  const auto manifest = data::Manifest::load_csv(a.manifest);
  manifest.validate();
  data::VideoStore store(manifest);
  jepa::ModelConfig mc{a.model.encoder(), a.model.predictor()};
  auto& cfg = a.pretrain;
  cfg.seed = a.seed;
  cfg.mask.block_h = cfg.mask.block_w = a.mask_block;
  cfg.augment.target_height = cfg.augment.target_width = a.model.frame_size;
  jepa::JepaModel model(mc, a.seed);
  const auto result = jepa::pretrain_run(model, manifest, store, cfg, [&](const jepa::StepLog& s) {
    if (s.step % 20 == 0 || s.step + 1 == cfg.steps) {
      std::cerr << "step " << s.step << " loss " << s.loss << " m " << s.momentum << " lr " << s.lr
                << " token_var " << s.token_variance << "\n";
    }
  });
  const auto ckpt = model.to_checkpoint();
  ckpt.save(dir / "checkpoint.vjfc");
  write_text(dir / "loss.csv", jepa::loss_log_csv(result.log));
  std::cout << "checkpoint: " << (dir / "checkpoint.vjfc").string() << " (" << checksum_hex(ckpt.checksum())
            << ")\n";
  return kOk;
}

vit::Encoder<float> frozen_encoder(const Args& a) {
  if (a.encoder == "random") {
    auto rng = Rng::derive(a.seed, 0);
    return vit::Encoder<float>(a.model.encoder(), rng);
  }
  auto enc = vit::load_encoder(Checkpoint::load(a.encoder), a.encoder_key);
  enc.set_requires_grad(false);
  return enc;
}

data::FoldPlan fold_plan(const Args& a, const data::Manifest& manifest) {
  if (!a.folds.empty()) return data::FoldPlan::load(a.folds);
  auto source = a.fold_source;
  if (source == "auto") {
    const auto roster = data::crema_d_subjects();
    bool all_in_table = manifest.dataset() == data::DatasetTag::CremaD;
    for (const auto& s : manifest.subjects()) {
      if (!std::binary_search(roster.begin(), roster.end(), s)) all_in_table = false;
    }
    source = all_in_table ? "table" : "generated";
  }
  if (source == "table") return data::make_folds(manifest, 5, data::FoldSource::Table);
  if (source == "generated") return data::make_folds(manifest, a.k, data::FoldSource::Generated, a.fold_seed);
  throw ConfigError("unknown fold source '" + source + "' (expected auto, table or generated)");
}

std::vector<std::size_t> selected_folds(int fold, std::size_t k) {
  if (fold < 0) {
    std::vector<std::size_t> all(k);
    for (std::size_t i = 0; i < k; ++i) all[i] = i;
    return all;
  }
  if (static_cast<std::size_t>(fold) >= k) throw ConfigError("--fold " + std::to_string(fold) + " out of range");
  return {static_cast<std::size_t>(fold)};
}

int cmd_train_probe(Args& a) {
  const auto dir = output_dir(a.out);
  const auto manifest = data::Manifest::load_csv(a.manifest);
  manifest.validate();
  const auto plan = fold_plan(a, manifest);
  const auto report = data::verify_folds(plan, manifest);
  if (!report.passed) throw ProtocolError("fold plan fails verification:\n" + report.to_text());
  const auto encoder = frozen_encoder(a);
  auto cfg = a.probe;
  cfg.seed = a.seed;
  cfg.pooling = probe::parse_pooling(a.pooling);
  cfg.augment.target_height = encoder.config().height;
  cfg.augment.target_width = encoder.config().width;

  Checkpoint enc_ckpt;
  vit::add_to_checkpoint(enc_ckpt, encoder, "encoder");
  const auto before = enc_ckpt.checksum();
  data::VideoStore store(manifest);
  for (auto f : selected_folds(a.fold, plan.folds.size())) {
    const auto fold_dir = dir / ("fold" + std::to_string(f));
    fs::create_directories(fold_dir);
    auto result = probe::train_probe(encoder, manifest, store, plan, f, cfg, [&](const probe::EpochStats& e) {
      std::cerr << "fold " << f << " epoch " << e.epoch << " loss " << e.mean_loss << " train_war " << e.train_war
                << "\n";
    });
    Checkpoint ckpt;
    probe::add_to_checkpoint(ckpt, result.probe);
    ckpt.save(fold_dir / "probe.vjfc");
    write_text(fold_dir / "history.csv", probe::history_csv(result.history));
  }
  Checkpoint after_ckpt;
  vit::add_to_checkpoint(after_ckpt, encoder, "encoder");
  if (after_ckpt.checksum() != before) throw NumericError("encoder weights changed during probe training");

  enc_ckpt.save(dir / "encoder.vjfc");
  plan.save(dir / "folds.json");
  const auto labels = manifest.label_set();
  nlohmann::ordered_json info{{"dataset", data::to_string(labels.tag())}, {"labels", labels.names()}};
  write_text(dir / "labels.json", info.dump(2) + "\n");
  std::cout << "encoder checksum " << checksum_hex(before) << " unchanged\n";
  return kOk;
}

struct ProbeBundle {
  vit::Encoder<float> encoder;
  data::FoldPlan plan;
  data::LabelSet labels;
  std::map<std::size_t, probe::AttentiveProbe<float>> probes;
};

ProbeBundle load_bundle(const fs::path& dir, int fold) {
  if (!fs::is_directory(dir)) throw IoError("probe directory " + dir.string() + " does not exist");
  auto encoder = vit::load_encoder(Checkpoint::load(dir / "encoder.vjfc"), "encoder");
  auto plan = data::FoldPlan::load(dir / "folds.json");
  const auto info = nlohmann::json::parse(io::read_file(dir / "labels.json"), nullptr, false);
  if (info.is_discarded() || !info.contains("dataset") || !info.contains("labels")) {
    throw FormatError((dir / "labels.json").string() + ": malformed");
  }
  data::LabelSet labels(data::parse_dataset_tag(info["dataset"].get<std::string>()),
                        info["labels"].get<std::vector<std::string>>());
  ProbeBundle b{std::move(encoder), std::move(plan), std::move(labels), {}};
  for (auto f : selected_folds(fold, b.plan.folds.size())) {
    const auto path = dir / ("fold" + std::to_string(f)) / "probe.vjfc";
    if (fold < 0 && !fs::exists(path)) continue;
    b.probes.emplace(f, probe::load_probe(Checkpoint::load(path)));
  }
  if (b.probes.empty()) throw IoError("no probe checkpoints under " + dir.string());
  return b;
}

void write_confusions(const fs::path& dir, const eval::MetricsReport& r, const std::string& title) {
  fs::create_directories(dir);
  write_text(dir / "confusion.csv", eval::confusion_csv(r.labels, r.summed));
  write_text(dir / "confusion_avg.csv", eval::confusion_csv(r.labels, r.averaged));
  write_text(dir / "confusion.svg", eval::confusion_svg(r.labels, r.averaged, title));
}

int cmd_eval(Args& a) {
  const auto strategies = votings(a.voting);
  const auto dir = output_dir(a.out);
  const auto manifest = data::Manifest::load_csv(a.manifest);
  manifest.validate();
  const auto bundle = load_bundle(a.probes, a.fold);
  const auto labels = manifest.label_set();
  if (!(labels == bundle.labels)) throw ProtocolError("probes were trained on a different label set; use cross-eval");
  data::VideoStore store(manifest);
  eval::EvalOptions opts;
  opts.stride = a.stride;
  opts.augment.target_height = bundle.encoder.config().height;
  opts.augment.target_width = bundle.encoder.config().width;

  std::vector<std::vector<eval::ConfusionMatrix>> per_voting(strategies.size());
  for (const auto& [f, head] : bundle.probes) {
    const auto split = data::split_fold(manifest, bundle.plan, f);
    if (split.validation.empty()) throw ProtocolError("fold " + std::to_string(f) + " has no validation videos");
    const auto videos = eval::predict_videos(bundle.encoder, head, store, split.validation, labels, opts);
    for (std::size_t v = 0; v < strategies.size(); ++v) {
      per_voting[v].push_back(eval::confusion_from(videos, strategies[v], labels.size()));
    }
    std::vector<std::vector<double>> att, avg;
    std::vector<std::string> names;
    for (const auto& v : videos) {
      att.push_back(v.attentive_embedding);
      avg.push_back(v.average_embedding);
      names.push_back(labels.name(v.truth));
    }
    const auto fold_dir = dir / ("fold" + std::to_string(f));
    fs::create_directories(fold_dir);
    if (videos.size() >= 2) {
      write_text(fold_dir / "pca.csv", eval::pca_csv(eval::pca2(att), names));
      write_text(fold_dir / "pca_average.csv", eval::pca_csv(eval::pca2(avg), names));
    }
  }
  std::vector<eval::MetricsReport> reports;
  for (std::size_t v = 0; v < strategies.size(); ++v) {
    auto r = eval::MetricsReport::aggregate(data::to_string(labels.tag()), strategies[v], labels.names(),
                                            per_voting[v]);
    write_confusions(dir / eval::to_string(strategies[v]), r,
                     data::to_string(labels.tag()) + " " + eval::to_string(strategies[v]));
    std::cout << data::to_string(labels.tag()) << " " << eval::to_string(strategies[v]) << ": UAR " << r.mean_uar
              << " WAR " << r.mean_war << " (std " << r.std_war << ")\n";
    reports.push_back(std::move(r));
  }
  write_text(dir / "metrics.json", eval::metrics_json(reports));
  return kOk;
}

int cmd_cross_eval(Args& a) {
  const auto mode_list = modes(a.mode);
  const auto voting_list = votings(a.voting);
  const auto dir = output_dir(a.out);
  const auto manifest = data::Manifest::load_csv(a.manifest);
  manifest.validate();
  const auto bundle = load_bundle(a.probes, a.fold);
  const auto target = manifest.label_set();
  if (target.tag() == bundle.labels.tag()) {
    throw UsageError("cross-eval needs probes from another dataset; use eval for " + data::to_string(target.tag()));
  }
  data::VideoStore store(manifest);
  eval::EvalOptions opts;
  opts.stride = a.stride;
  opts.augment.target_height = bundle.encoder.config().height;
  opts.augment.target_width = bundle.encoder.config().width;
  std::vector<const data::VideoRecord*> records;
  for (const auto& r : manifest.records) records.push_back(&r);
  std::vector<const probe::AttentiveProbe<float>*> heads;
  for (const auto& [f, head] : bundle.probes) heads.push_back(&head);
  const auto per_probe = eval::predict_videos_multi(bundle.encoder, heads, store, records, target, opts);

  std::vector<eval::MetricsReport> reports;
  for (auto m : mode_list) {
    for (auto v : voting_list) {
      auto r = eval::cross_report(bundle.labels, target, m, v, per_probe);
      const auto tag = eval::to_string(m) + "_" + eval::to_string(v);
      write_confusions(dir / tag, r, data::to_string(bundle.labels.tag()) + " -> " + r.dataset + " " + tag);
      std::cout << data::to_string(bundle.labels.tag()) << " -> " << r.dataset << " " << tag << ": UAR "
                << r.mean_uar << " WAR " << r.mean_war << " dropped " << r.dropped << "\n";
      reports.push_back(std::move(r));
    }
  }
  write_text(dir / "metrics.json", eval::metrics_json(reports));
  return kOk;
}

int cmd_gradcheck(Args& a) {
  auto results = primitive_gradcheck_suite(a.seed, a.trials, a.tolerance);
  for (auto& r : model_gradcheck_suite(a.seed, 2, a.tolerance)) results.push_back(r);
  std::ostringstream table;
  table << "name,max_rel_error,trials,tolerance,passed\n";
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-20s %-4s max rel err %.3e over %zu seeds (tol %.0e)\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                r.max_rel_error, r.trials, r.tolerance);
    table << r.name << ',' << r.max_rel_error << ',' << r.trials << ',' << r.tolerance << ',' << r.passed << '\n';
    ok = ok && r.passed;
  }
  if (!a.out.empty()) write_text(output_dir(a.out) / "gradcheck.csv", table.str());
  return ok ? kOk : kNumericError;
}

int cmd_splits_verify(Args& a) {
  const auto plan = a.plan == "table" ? data::crema_d_table_plan() : data::FoldPlan::load(a.plan);
  data::FoldReport report;
  if (!a.manifest.empty()) {
    const auto manifest = data::Manifest::load_csv(a.manifest);
    report = data::verify_folds(plan, manifest);
  } else if (a.plan == "table") {
    report = data::verify_folds(plan, data::crema_d_subjects());
  } else {
    // Without a manifest the plan is checked against its own subject union.
    std::set<std::string> seen;
    for (const auto& fold : plan.folds) seen.insert(fold.begin(), fold.end());
    report = data::verify_folds(plan, std::vector<std::string>(seen.begin(), seen.end()));
  }
  std::cout << report.to_text();
  if (!a.out.empty()) write_text(output_dir(a.out) / "splits_report.txt", report.to_text());
  return report.passed ? kOk : kDataError;
}

/// Re-parses with the config file's keys placed before the command-line
/// arguments, so explicit flags win. Keys must name options of the command
/// (optionally under a [command] section).
void apply_config(CLI::App& app, CLI::App* cmd, const std::string& path, std::vector<std::string> args) {
  if (!fs::exists(path)) throw IoError("config file " + path + " does not exist");
  const auto items = CLI::ConfigINI().from_file(path);
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && item.parents.front() != cmd->get_name()) {
      throw ConfigError("config: section [" + item.parents.front() + "] does not match command " + cmd->get_name());
    }
    if (item.name == "config") throw ConfigError("config: a config file cannot name another config file");
    if (cmd->get_option_no_throw("--" + item.name) == nullptr) {
      throw ConfigError("config: unknown key '" + item.name + "' for " + cmd->get_name());
    }
    injected.push_back("--" + item.name);
    for (const auto& v : item.inputs) injected.push_back(v);
  }
  // args holds the command line after the program name, reversed as CLI11
  // expects; the command name comes first in reading order.
  std::vector<std::string> ordered(args.rbegin(), args.rend());
  auto pos = std::find(ordered.begin(), ordered.end(), cmd->get_name());
  ordered.insert(pos + 1, injected.begin(), injected.end());
  app.clear();
  app.parse(std::vector<std::string>(ordered.rbegin(), ordered.rend()));
}

}  // namespace

int main(int argc, char** argv) {
  Args a;
  CLI::App app{"V-JEPA style video pre-training and attentive-probe expression recognition", "jepa-fer"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto common = [&](CLI::App* cmd, bool out_required) {
    cmd->add_option("--config", a.config, "Flat key = value file; keys are this command's long options");
    auto* out = cmd->add_option("--out", a.out, "Existing output directory");
    if (out_required) out->required();
    cmd->add_option("--seed", a.seed, "Random seed");
  };

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic RVT1 dataset and manifest");
  common(gen, true);
  gen->add_option("--classes", a.synth.classes, "Classes (SYNTH only)");
  gen->add_option("--subjects", a.synth.subjects, "Subjects");
  gen->add_option("--videos-per-class", a.synth.videos_per_subject_class, "Videos per subject and class");
  gen->add_option("--min-frames", a.synth.min_frames, "Shortest video");
  gen->add_option("--max-frames", a.synth.max_frames, "Longest video");
  gen->add_option("--size", a.size, "Frame side in pixels");
  gen->add_option("--like", a.like, "Label layout: synth, ravdess or cremad");
  gen->add_option("--folds", a.synth.folds, "Folds for the generated plan");

  auto* pre = app.add_subcommand("pretrain", "Masked latent prediction pre-training");
  common(pre, true);
  pre->add_option("--manifest", a.manifest, "Manifest CSV")->required();
  add_encoder_options(pre, a.model);
  pre->add_option("--pred-dim", a.model.pred_dim, "Predictor width");
  pre->add_option("--pred-depth", a.model.pred_depth, "Predictor blocks");
  pre->add_option("--pred-heads", a.model.pred_heads, "Predictor heads");
  a.pretrain = jepa::PretrainConfig::toy();
  pre->add_option("--steps", a.pretrain.steps, "Optimizer steps");
  pre->add_option("--batch", a.pretrain.batch_size, "Clips per step");
  pre->add_option("--lr", a.pretrain.lr, "Peak learning rate");
  pre->add_option("--weight-decay", a.pretrain.weight_decay, "Decoupled weight decay");
  pre->add_option("--warmup", a.pretrain.warmup_fraction, "Warmup fraction of steps");
  pre->add_option("--mask-ratio", a.pretrain.mask.ratio, "Fraction of spatial cells masked");
  pre->add_option("--mask-block", a.mask_block, "Square mask block side, in tokens");
  pre->add_option("--ema-start", a.pretrain.ema_start, "Target momentum at the first step");
  pre->add_option("--ema-end", a.pretrain.ema_end, "Target momentum at the last step");

  auto* train = app.add_subcommand("train-probe", "Train attentive probes on a frozen encoder");
  common(train, true);
  train->add_option("--manifest", a.manifest, "Manifest CSV")->required();
  train->add_option("--encoder", a.encoder, "Encoder checkpoint, or 'random'");
  train->add_option("--encoder-key", a.encoder_key, "Checkpoint prefix: encoder or target_encoder");
  add_encoder_options(train, a.model);
  train->add_option("--folds", a.folds, "Fold plan JSON (default: derived from the manifest)");
  train->add_option("--fold-source", a.fold_source, "auto, table or generated");
  train->add_option("--fold-seed", a.fold_seed, "Seed for generated folds");
  train->add_option("--k", a.k, "Fold count for generated folds");
  train->add_option("--fold", a.fold, "Single fold to train (default: all)");
  train->add_option("--epochs", a.probe.epochs, "Epochs");
  train->add_option("--clips", a.probe.clips_per_video, "Random clips per video per epoch");
  train->add_option("--batch", a.probe.batch_size, "Clips per optimizer step");
  train->add_option("--lr", a.probe.lr, "Learning rate");
  train->add_option("--weight-decay", a.probe.weight_decay, "Decoupled weight decay");
  train->add_option("--pooling", a.pooling, "attentive or average");

  auto* ev = app.add_subcommand("eval", "Whole-video evaluation of trained probes");
  common(ev, true);
  ev->add_option("--manifest", a.manifest, "Manifest CSV")->required();
  ev->add_option("--probes", a.probes, "train-probe output directory")->required();
  ev->add_option("--voting", a.voting, "mv, pbv or both");
  ev->add_option("--stride", a.stride, "Start-frame step between evaluated clips");
  ev->add_option("--fold", a.fold, "Single fold (default: all)");

  auto* cross = app.add_subcommand("cross-eval", "Evaluate probes on the other dataset");
  common(cross, true);
  cross->add_option("--manifest", a.manifest, "Manifest CSV of the target dataset")->required();
  cross->add_option("--probes", a.probes, "train-probe output directory (source dataset)")->required();
  cross->add_option("--mode", a.mode, "drop, merge or both");
  cross->add_option("--voting", a.voting, "mv, pbv or both");
  cross->add_option("--stride", a.stride, "Start-frame step between evaluated clips");
  cross->add_option("--fold", a.fold, "Single source probe (default: all)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable primitive");
  common(grad, false);
  grad->add_option("--trials", a.trials, "Random seeds per primitive");
  grad->add_option("--tolerance", a.tolerance, "Relative error bound");

  auto* splits = app.add_subcommand("splits-verify", "Check a fold plan for subject independence and coverage");
  common(splits, false);
  splits->add_option("--plan", a.plan, "'table' (built-in CREMA-D plan) or a plan JSON path");
  splits->add_option("--manifest", a.manifest, "Manifest to check coverage against");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    try {
      app.parse(std::vector<std::string>(args));
      CLI::App* cmd = app.get_subcommands().front();
      if (!a.config.empty()) apply_config(app, cmd, a.config, args);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kOk : kConfigError;
    }
    CLI::App* cmd = app.get_subcommands().front();
    int code = kOk;
    if (cmd == gen) code = cmd_gen_synth(a);
    else if (cmd == pre) code = cmd_pretrain(a);
    else if (cmd == train) code = cmd_train_probe(a);
    else if (cmd == ev) code = cmd_eval(a);
    else if (cmd == cross) code = cmd_cross_eval(a);
    else if (cmd == grad) code = cmd_gradcheck(a);
    else if (cmd == splits) code = cmd_splits_verify(a);
    if (code == kOk && !a.out.empty()) write_text(fs::path(a.out) / "config.ini", resolved_config(cmd));
    return code;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CLI::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
}
