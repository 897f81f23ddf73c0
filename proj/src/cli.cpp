// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "lpclip/metrics.hpp"
#include "lpclip/numeric.hpp"
#include "lpclip/plot.hpp"

namespace lpclip::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

std::size_t line_of(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  std::size_t found = std::string_view::npos;
  for (const std::string& key : path) {
    const std::size_t at = text.find('"' + key + '"', pos);
    if (at == std::string_view::npos) break;
    found = at;
    pos = at + 1;
  }
  if (found == std::string_view::npos) return 1;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + found, '\n'));
}

class Parser {
 public:
  Parser(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& reason) const {
    std::string field;
    for (const std::string& key : path) field += (field.empty() ? "" : ".") + key;
    throw ConfigError(source_ + ":" + std::to_string(line_of(text_, path)) + ": " + field + ": " +
                      reason);
  }

  const json& object(const json& doc, const std::vector<std::string>& path,
                     const std::set<std::string>& known) const {
    if (!doc.is_object()) fail(path, "must be an object");
    for (const auto& [key, value] : doc.items()) {
      if (!known.contains(key)) {
        std::vector<std::string> at = path;
        at.push_back(key);
        fail(at, "unknown key");
      }
    }
    return doc;
  }

  template <class T>
  void read(const json& doc, const std::vector<std::string>& section, const std::string& key,
            T& out) const {
    if (!doc.contains(key)) return;
    std::vector<std::string> path = section;
    path.push_back(key);
    const json& v = doc.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "must be a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "must be a number");
      out = v.get<T>();
    } else {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                     v.get<std::int64_t>() < 0)) {
        fail(path, "must be a non-negative integer");
      }
      out = v.get<T>();
    }
  }

 private:
  std::string_view text_;
  std::string source_;
};

std::vector<augment::CorruptionSpec> default_corruptions() {
  std::vector<augment::CorruptionSpec> out;
  for (augment::CorruptionKind kind : augment::kAllCorruptions) out.push_back({kind, 3});
  return out;
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string split_file_stem(const augment::CorruptionSpec& spec) {
  return std::string(augment::corruption_name(spec.kind)) + "_" + std::to_string(spec.severity);
}

void write_json(const json& doc, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw PipelineError("cannot open " + path.string());
  out << doc.dump(2) << '\n';
}

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw PipelineError("cannot open " + path.string());
  return out;
}

std::string seed_text(const std::optional<std::uint64_t>& seed) {
  return seed ? std::to_string(*seed) : "-";
}

const std::vector<std::int64_t>& require_labels(const tensorio::EmbeddingStore& store,
                                                const std::string& what) {
  if (!store.manifest.labels) throw PipelineError(what + " has no labels");
  return *store.manifest.labels;
}

tensorio::EmbeddingStore load_store(const fs::path& path) {
  if (!fs::exists(path)) throw PipelineError("missing store: " + path.string());
  return tensorio::read_store(path);
}

std::vector<bool> correctness(std::span<const std::size_t> predicted,
                              std::span<const std::int64_t> labels) {
  std::vector<bool> out(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    out[i] = labels[i] >= 0 && predicted[i] == static_cast<std::size_t>(labels[i]);
  }
  return out;
}

struct Scored {
  std::vector<std::size_t> labels;
  std::vector<double> confidence;
};

Scored score_teacher(const tensorio::EmbeddingStore& store, const zeroshot::ClassAnchors& anchors,
                     double temperature) {
  zeroshot::TeacherOutput out =
      zeroshot::teacher_predict(zeroshot::compute_logits(store, anchors), temperature);
  return {std::move(out.pseudo_label), std::move(out.confidence)};
}

Scored score_probe(const tensorio::EmbeddingStore& store, const probe::ProbeParams& params) {
  probe::Prediction out = probe::predict_probe(params, store.matrix);
  return {std::move(out.labels), std::move(out.confidence)};
}

SplitMetrics split_metrics(const std::string& name, const Scored& scored,
                           const tensorio::EmbeddingStore& store, std::size_t bins) {
  const auto& labels = require_labels(store, "store for split " + name);
  const auto report =
      metrics::calibration_report(scored.confidence, correctness(scored.labels, labels), {}, bins);
  return {name, metrics::accuracy(scored.labels, labels), report.ece};
}

void write_calibration_outputs(const Scored& scored, const tensorio::EmbeddingStore& store,
                               std::span<const double> ood_confidence, std::size_t bins,
                               const fs::path& dir) {
  const auto& labels = require_labels(store, "test store");
  const auto report = metrics::calibration_report(
      scored.confidence, correctness(scored.labels, labels), ood_confidence, bins);
  fs::create_directories(dir);
  metrics::write_calibration_csv(report, dir / "calibration.csv");
  metrics::write_histogram_csv(report, dir / "histogram.csv");
  write_json(metrics::to_json(report), dir / "calibration.json");
}

json eval_to_json(const ModelEval& eval) {
  json doc;
  doc["model"] = eval.model;
  if (eval.seed) doc["seed"] = *eval.seed;
  json splits = json::array();
  for (const SplitMetrics& s : eval.splits) {
    splits.push_back({{"split", s.split}, {"accuracy", s.accuracy}, {"ece", s.ece}});
  }
  doc["splits"] = splits;
  return doc;
}

/// Mean of the corrupted splits of one evaluation.
std::pair<double, double> corrupted_means(const ModelEval& eval) {
  double acc = 0.0;
  double ece = 0.0;
  std::size_t n = 0;
  for (const SplitMetrics& s : eval.splits) {
    if (s.split == "clean") continue;
    acc += s.accuracy;
    ece += s.ece;
    ++n;
  }
  if (n == 0) return {std::nan(""), std::nan("")};
  return {acc / static_cast<double>(n), ece / static_cast<double>(n)};
}

}  // namespace

// ---------------------------------------------------------------------------

PipelineConfig::PipelineConfig() { eval.corruptions = default_corruptions(); }

PipelineConfig parse_config(std::string_view text, std::string_view source) {
  const Parser p(text, source);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
    throw ConfigError(std::string(source) + ":" + std::to_string(line) + ": <document>: invalid JSON");
  }

  PipelineConfig c;
  p.object(doc, {}, {"dataset", "encoder", "prompts", "train", "eval", "seeds", "out_dir"});

  if (doc.contains("dataset")) {
    const std::vector<std::string> at{"dataset"};
    const json& d = p.object(doc.at("dataset"), at,
                             {"kind", "classes", "per_class", "img_size", "jitter", "noise_sigma",
                              "seed", "test_per_class", "test_seed", "ood_count", "views",
                              "view_seed", "root"});
    p.read(d, at, "kind", c.dataset.kind);
    p.read(d, at, "classes", c.dataset.toy.classes);
    p.read(d, at, "per_class", c.dataset.toy.per_class);
    p.read(d, at, "img_size", c.dataset.toy.img_size);
    p.read(d, at, "jitter", c.dataset.toy.jitter);
    p.read(d, at, "noise_sigma", c.dataset.toy.noise_sigma);
    p.read(d, at, "seed", c.dataset.toy.seed);
    p.read(d, at, "test_per_class", c.dataset.test_per_class);
    p.read(d, at, "test_seed", c.dataset.test_seed);
    p.read(d, at, "ood_count", c.dataset.ood_count);
    p.read(d, at, "views", c.dataset.views);
    p.read(d, at, "view_seed", c.dataset.view_seed);
    p.read(d, at, "root", c.dataset.root);
  }
  if (doc.contains("encoder")) {
    const std::vector<std::string> at{"encoder"};
    const json& e = p.object(doc.at("encoder"), at, {"kind", "dim", "patch", "seed"});
    p.read(e, at, "kind", c.encoder.kind);
    p.read(e, at, "dim", c.encoder.toy.dim);
    p.read(e, at, "patch", c.encoder.toy.patch);
    p.read(e, at, "seed", c.encoder.toy.seed);
  }
  if (doc.contains("prompts")) {
    const std::vector<std::string> at{"prompts"};
    const json& q = p.object(doc.at("prompts"), at,
                             {"count", "anchor_samples", "mode", "index", "selection_set"});
    p.read(q, at, "count", c.prompts.count);
    p.read(q, at, "anchor_samples", c.prompts.anchor_samples);
    p.read(q, at, "mode", c.prompts.mode);
    p.read(q, at, "index", c.prompts.index);
    p.read(q, at, "selection_set", c.prompts.selection_set);
  }
  if (doc.contains("train")) {
    try {
      c.train = probe::config_from_json(doc.at("train"));
      c.train.validate();
    } catch (const probe::ProbeError& e) {
      const std::string msg = e.what();
      const std::size_t space = msg.find(' ');
      const std::string key = msg.substr(0, space);
      if (space != std::string::npos && doc.at("train").is_object() &&
          probe::config_to_json(probe::TrainConfig{}).contains(key)) {
        p.fail({"train", key}, msg.substr(space + 1));
      }
      p.fail({"train"}, msg);
    }
  }
  if (doc.contains("eval")) {
    const std::vector<std::string> at{"eval"};
    const json& e = p.object(doc.at("eval"), at, {"bins", "corruptions", "corruption_seed", "ood_store"});
    p.read(e, at, "bins", c.eval.bins);
    p.read(e, at, "corruption_seed", c.eval.corruption_seed);
    p.read(e, at, "ood_store", c.eval.ood_store);
    if (e.contains("corruptions")) {
      const json& list = e.at("corruptions");
      if (!list.is_array()) p.fail({"eval", "corruptions"}, "must be an array of \"kind:severity\"");
      c.eval.corruptions.clear();
      for (const json& item : list) {
        if (!item.is_string()) p.fail({"eval", "corruptions"}, "entries must be strings");
        try {
          c.eval.corruptions.push_back(augment::parse_corruption(item.get<std::string>()));
        } catch (const std::exception& ex) {
          p.fail({"eval", "corruptions"}, ex.what());
        }
      }
    }
  }
  if (doc.contains("seeds")) {
    const json& list = doc.at("seeds");
    if (!list.is_array()) p.fail({"seeds"}, "must be an array of non-negative integers");
    c.seeds.clear();
    for (const json& s : list) {
      if (!s.is_number_unsigned()) p.fail({"seeds"}, "must be an array of non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  p.read(doc, {}, "out_dir", c.out_dir);

  // Semantic checks.
  const auto& ds = c.dataset;
  if (ds.kind != "toy" && ds.kind != "stores") p.fail({"dataset", "kind"}, "must be \"toy\" or \"stores\"");
  if (ds.toy.classes < 2) p.fail({"dataset", "classes"}, "must be at least 2");
  if (ds.toy.per_class < 1) p.fail({"dataset", "per_class"}, "must be at least 1");
  if (ds.toy.img_size < augment::kMinAugmentSize) p.fail({"dataset", "img_size"}, "must be at least 8");
  if (!(ds.toy.jitter >= 0.0 && ds.toy.jitter <= 1.0)) p.fail({"dataset", "jitter"}, "must lie in [0, 1]");
  if (!(ds.toy.noise_sigma >= 0.0)) p.fail({"dataset", "noise_sigma"}, "must be non-negative");
  if (ds.test_per_class < 1) p.fail({"dataset", "test_per_class"}, "must be at least 1");
  if (ds.ood_count < 1) p.fail({"dataset", "ood_count"}, "must be at least 1");
  if (ds.kind == "stores" && ds.root.empty()) p.fail({"dataset", "root"}, "required when kind is \"stores\"");

  const auto& en = c.encoder;
  if (en.kind != "toy" && en.kind != "external") p.fail({"encoder", "kind"}, "must be \"toy\" or \"external\"");
  if (ds.kind == "toy" && en.kind != "toy") p.fail({"encoder", "kind"}, "toy datasets need the toy encoder");
  if (ds.kind == "stores" && en.kind != "external") {
    p.fail({"encoder", "kind"}, "stored datasets need an \"external\" encoder");
  }
  if (en.toy.dim < 8) p.fail({"encoder", "dim"}, "must be at least 8");
  if (en.toy.patch < 1) p.fail({"encoder", "patch"}, "must be positive");
  if (ds.kind == "toy" && ds.toy.img_size % en.toy.patch != 0) {
    p.fail({"encoder", "patch"}, "must divide dataset.img_size");
  }

  const auto& pr = c.prompts;
  if (pr.count < 1) p.fail({"prompts", "count"}, "must be at least 1");
  if (pr.anchor_samples < 1) p.fail({"prompts", "anchor_samples"}, "must be at least 1");
  if (pr.mode != "best" && pr.mode != "mean" && pr.mode != "single") {
    p.fail({"prompts", "mode"}, "must be \"best\", \"mean\" or \"single\"");
  }
  if (pr.mode == "single" && ds.kind == "toy" && pr.index >= pr.count) {
    p.fail({"prompts", "index"}, "must be below prompts.count");
  }
  if (pr.selection_set != "test" && pr.selection_set != "train") {
    p.fail({"prompts", "selection_set"}, "must be \"test\" or \"train\"");
  }

  if (c.eval.bins < 1) p.fail({"eval", "bins"}, "must be at least 1");
  if (c.seeds.empty()) p.fail({"seeds"}, "must not be empty");
  if (c.out_dir.empty()) p.fail({"out_dir"}, "must not be empty");
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ":0: <document>: cannot open config");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

json config_to_json(const PipelineConfig& c) {
  json doc;
  doc["dataset"] = {{"kind", c.dataset.kind},
                    {"classes", c.dataset.toy.classes},
                    {"per_class", c.dataset.toy.per_class},
                    {"img_size", c.dataset.toy.img_size},
                    {"jitter", c.dataset.toy.jitter},
                    {"noise_sigma", c.dataset.toy.noise_sigma},
                    {"seed", c.dataset.toy.seed},
                    {"test_per_class", c.dataset.test_per_class},
                    {"test_seed", c.dataset.test_seed},
                    {"ood_count", c.dataset.ood_count},
                    {"views", c.dataset.views},
                    {"view_seed", c.dataset.view_seed},
                    {"root", c.dataset.root}};
  doc["encoder"] = {{"kind", c.encoder.kind},
                    {"dim", c.encoder.toy.dim},
                    {"patch", c.encoder.toy.patch},
                    {"seed", c.encoder.toy.seed}};
  doc["prompts"] = {{"count", c.prompts.count},
                    {"anchor_samples", c.prompts.anchor_samples},
                    {"mode", c.prompts.mode},
                    {"index", c.prompts.index},
                    {"selection_set", c.prompts.selection_set}};
  doc["train"] = probe::config_to_json(c.train);
  json corruptions = json::array();
  for (const auto& spec : c.eval.corruptions) corruptions.push_back(spec.label());
  doc["eval"] = {{"bins", c.eval.bins},
                 {"corruptions", corruptions},
                 {"corruption_seed", c.eval.corruption_seed},
                 {"ood_store", c.eval.ood_store}};
  doc["seeds"] = c.seeds;
  doc["out_dir"] = c.out_dir;
  return doc;
}

void apply_overrides(PipelineConfig& c, const Overrides& o) {
  if (o.seeds) {
    if (o.seeds->empty()) throw ConfigError("--seeds: must not be empty");
    c.seeds = *o.seeds;
  }
  if (o.seed) c.seeds = {*o.seed};
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.corruptions) {
    try {
      c.eval.corruptions = augment::parse_corruption_list(*o.corruptions);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--corrupt: ") + e.what());
    }
  }
  if (o.no_weighting) c.train.confidence_weighting = false;
  if (o.no_strong_aug) c.train.strong_augmentation = false;
  if (o.views) c.dataset.views = *o.views;
}

std::string variant_name(const probe::TrainConfig& t) {
  if (t.confidence_weighting && t.strong_augmentation) return "lpclip";
  if (!t.confidence_weighting && t.strong_augmentation) return "no_weighting";
  if (t.confidence_weighting) return "no_aug";
  return "no_weighting_no_aug";
}

std::vector<std::string> all_variant_names() {
  return {"lpclip", "no_weighting", "no_aug", "no_weighting_no_aug"};
}

probe::TrainConfig variant_config(const probe::TrainConfig& base, std::string_view variant) {
  probe::TrainConfig out = base;
  if (variant == "lpclip") {
    out.confidence_weighting = true;
    out.strong_augmentation = true;
  } else if (variant == "no_weighting") {
    out.confidence_weighting = false;
    out.strong_augmentation = true;
  } else if (variant == "no_aug") {
    out.confidence_weighting = true;
    out.strong_augmentation = false;
  } else if (variant == "no_weighting_no_aug") {
    out.confidence_weighting = false;
    out.strong_augmentation = false;
  } else {
    throw PipelineError("unknown variant " + std::string(variant));
  }
  return out;
}

fs::path DataLayout::corrupt_store(const augment::CorruptionSpec& spec) const {
  return corrupt_dir / (split_file_stem(spec) + ".lpce");
}

DataLayout data_layout(const PipelineConfig& c) {
  const fs::path data = c.dataset.kind == "stores" ? fs::path(c.dataset.root) : fs::path(c.out_dir) / "data";
  DataLayout out;
  out.train_group = data / "train";
  out.test_store = data / "test.lpce";
  out.ood_store = c.eval.ood_store.empty() ? data / "ood.lpce" : fs::path(c.eval.ood_store);
  out.prompt_store = data / "prompts.lpce";
  out.corrupt_dir = data / "corrupt";
  return out;
}

const SplitMetrics& ModelEval::split(std::string_view name) const {
  for (const SplitMetrics& s : splits) {
    if (s.split == name) return s;
  }
  throw PipelineError("no split " + std::string(name) + " for " + model);
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {std::nan(""), std::nan("")};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

void write_eval_csv(const std::vector<ModelEval>& rows, const fs::path& path) {
  std::ofstream out = open_csv(path);
  out << "model,seed,split,accuracy,ece\n";
  std::vector<std::string> models;
  for (const ModelEval& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
  }
  for (const std::string& model : models) {
    std::vector<const ModelEval*> seeded;
    for (const ModelEval& r : rows) {
      if (r.model != model) continue;
      for (const SplitMetrics& s : r.splits) {
        out << r.model << ',' << seed_text(r.seed) << ',' << s.split << ','
            << format_double(s.accuracy) << ',' << format_double(s.ece) << '\n';
      }
      if (r.seed) seeded.push_back(&r);
    }
    if (seeded.empty()) continue;
    std::vector<std::string> summary[2];
    for (const SplitMetrics& s : seeded.front()->splits) {
      std::vector<double> acc;
      std::vector<double> ece;
      for (const ModelEval* r : seeded) {
        acc.push_back(r->split(s.split).accuracy);
        ece.push_back(r->split(s.split).ece);
      }
      const auto [am, as] = mean_std(acc);
      const auto [em, es] = mean_std(ece);
      summary[0].push_back(model + ",mean," + s.split + "," + format_double(am) + "," +
                           format_double(em));
      summary[1].push_back(model + ",std," + s.split + "," + format_double(as) + "," +
                           format_double(es));
    }
    for (const auto& block : summary) {
      for (const std::string& line : block) out << line << '\n';
    }
  }
}

void write_ood_csv(const std::vector<OodRow>& rows, const fs::path& path) {
  std::ofstream out = open_csv(path);
  out << "model,seed,auroc,aupr,fpr95\n";
  std::map<std::string, std::vector<const OodRow*>> seeded;
  std::vector<std::string> order;
  for (const OodRow& r : rows) {
    out << r.model << ',' << seed_text(r.seed) << ',' << format_double(r.auroc) << ','
        << format_double(r.aupr) << ',' << format_double(r.fpr95) << '\n';
    if (!r.seed) continue;
    if (!seeded.contains(r.model)) order.push_back(r.model);
    seeded[r.model].push_back(&r);
  }
  for (const std::string& model : order) {
    std::vector<double> a, p, f;
    for (const OodRow* r : seeded[model]) {
      a.push_back(r->auroc);
      p.push_back(r->aupr);
      f.push_back(r->fpr95);
    }
    const auto [am, as] = mean_std(a);
    const auto [pm, ps] = mean_std(p);
    const auto [fm, fs_] = mean_std(f);
    out << model << ",mean," << format_double(am) << ',' << format_double(pm) << ','
        << format_double(fm) << '\n';
    out << model << ",std," << format_double(as) << ',' << format_double(ps) << ','
        << format_double(fs_) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig config, std::ostream* log) : config_(std::move(config)), log_(log) {}

void Pipeline::note(const std::string& message) const {
  if (log_ != nullptr) *log_ << message << '\n';
}

void Pipeline::write_resolved_config() const {
  write_json(config_to_json(config_), out_dir() / "resolved_config.json");
}

fs::path Pipeline::run_dir(std::uint64_t seed) const {
  return out_dir() / "train" / variant_name(config_.train) / seed_dir(seed);
}

fs::path Pipeline::ood_path() const { return data_layout(config_).ood_store; }

const tensorio::EmbeddingStore& Pipeline::test_store() {
  if (!test_) test_ = load_store(data_layout(config_).test_store);
  return *test_;
}

void Pipeline::synth() {
  if (config_.dataset.kind != "toy") throw PipelineError("synth requires dataset.kind \"toy\"");
  const DataLayout layout = data_layout(config_);
  const toyworld::ToyDatasetSpec& spec = config_.dataset.toy;
  const toyworld::ToyEncoder encoder(config_.encoder.toy);
  const std::vector<std::string> names = toyworld::toy_class_names(spec.classes);

  note("synth: train view group, K=" + std::to_string(config_.dataset.views));
  const toyworld::ToyDataset train = toyworld::gen_dataset(spec);
  const MatrixF weak = toyworld::encode_weak(train.images, encoder, spec.img_size);
  std::vector<MatrixF> strong;
  for (std::size_t k = 0; k < config_.dataset.views; ++k) {
    strong.push_back(toyworld::encode_strong(train.images, encoder, spec.img_size, k,
                                             config_.dataset.view_seed));
  }
  tensorio::Manifest manifest;
  manifest.class_names = names;
  manifest.labels = train.labels;
  manifest.view_group = "train";
  manifest.source = "toyworld";
  tensorio::write_view_group(layout.train_group, weak, strong, manifest);

  note("synth: test, ood and prompt stores");
  toyworld::ToyDatasetSpec test_spec = spec;
  test_spec.per_class = config_.dataset.test_per_class;
  test_spec.seed = config_.dataset.test_seed;
  const toyworld::ToyDataset test = toyworld::gen_dataset(test_spec);
  tensorio::Manifest test_manifest;
  test_manifest.class_names = names;
  test_manifest.labels = test.labels;
  test_manifest.source = "toyworld test";
  tensorio::write_store(toyworld::encode_weak(test.images, encoder, spec.img_size), test_manifest,
                        layout.test_store);

  const toyworld::ToyDataset ood = toyworld::gen_ood_dataset(test_spec, config_.dataset.ood_count);
  tensorio::Manifest ood_manifest;
  ood_manifest.class_names = names;
  ood_manifest.labels = ood.labels;
  ood_manifest.source = "toyworld ood";
  tensorio::write_store(toyworld::encode_weak(ood.images, encoder, spec.img_size), ood_manifest,
                        layout.ood_store);

  const zeroshot::PromptBank bank = toyworld::build_class_prompt_bank(
      spec, config_.encoder.toy, config_.prompts.count, config_.prompts.anchor_samples);
  tensorio::EmbeddingStore bank_store = bank.to_store(names);
  bank_store.manifest.source = "toyworld prompts";
  tensorio::write_store(bank_store.matrix, bank_store.manifest, layout.prompt_store);

  for (const augment::CorruptionSpec& cs : config_.eval.corruptions) {
    note("synth: corrupted test " + cs.label());
    std::vector<augment::Image> images;
    images.reserve(test.images.size());
    for (std::size_t i = 0; i < test.images.size(); ++i) {
      CounterRng rng = CounterRng::derive(
          config_.eval.corruption_seed,
          {static_cast<std::uint64_t>(cs.kind), static_cast<std::uint64_t>(cs.severity), i});
      images.push_back(augment::corrupt(test.images[i], cs.kind, cs.severity, rng));
    }
    tensorio::Manifest m = test_manifest;
    m.source = "toyworld test " + cs.label();
    tensorio::write_store(toyworld::encode_weak(images, encoder, spec.img_size), m,
                          layout.corrupt_store(cs));
  }
  test_.reset();
  anchors_.reset();
  selection_.reset();
}

const zeroshot::PromptSelection& Pipeline::selection() {
  if (!selection_) {
    const DataLayout layout = data_layout(config_);
    const zeroshot::PromptBank bank = zeroshot::PromptBank::from_store(load_store(layout.prompt_store));
    tensorio::EmbeddingStore set;
    if (config_.prompts.selection_set == "train") {
      set = load_store(layout.train_group / tensorio::kWeakStoreName);
    } else {
      set = test_store();
    }
    const auto& labels = require_labels(set, config_.prompts.selection_set + " store");
    try {
      selection_ = zeroshot::select_best_prompt(bank, set.matrix, labels, config_.train.temperature);
    } catch (const zeroshot::ZeroShotError& e) {
      throw PipelineError(e.what());
    }
  }
  return *selection_;
}

const zeroshot::ClassAnchors& Pipeline::anchors() {
  if (!anchors_) {
    const zeroshot::PromptBank bank =
        zeroshot::PromptBank::from_store(load_store(data_layout(config_).prompt_store));
    zeroshot::EnsembleMode mode = zeroshot::EnsembleMode::mean();
    if (config_.prompts.mode == "single") mode = zeroshot::EnsembleMode::single(config_.prompts.index);
    if (config_.prompts.mode == "best") mode = zeroshot::EnsembleMode::single(selection().best);
    anchors_ = zeroshot::ensemble_class_embeddings(bank, mode);
  }
  return *anchors_;
}

zeroshot::PromptSelection Pipeline::prompt_select() {
  const zeroshot::PromptSelection& sel = selection();
  const fs::path dir = out_dir() / "prompt_select";
  fs::create_directories(dir);
  zeroshot::write_prompt_accuracy_csv(sel, dir / "prompt_accuracy.csv");
  write_json({{"best", sel.best}, {"selection_set", config_.prompts.selection_set}, {"accuracy", sel.accuracy}},
             dir / "selection.json");
  note("prompt-select: best prompt " + std::to_string(sel.best) + " accuracy " +
       format_double(sel.accuracy.at(sel.best)));
  return sel;
}

ModelEval Pipeline::zeroshot() {
  const DataLayout layout = data_layout(config_);
  const auto& anchor = anchors();
  const double tau = config_.train.temperature;
  const std::size_t bins = config_.eval.bins;
  ModelEval result{"teacher", std::nullopt, {}};

  const Scored clean = score_teacher(test_store(), anchor, tau);
  result.splits.push_back(split_metrics("clean", clean, test_store(), bins));
  for (const auto& cs : config_.eval.corruptions) {
    const tensorio::EmbeddingStore store = load_store(layout.corrupt_store(cs));
    result.splits.push_back(split_metrics(cs.label(), score_teacher(store, anchor, tau), store, bins));
  }

  const fs::path dir = out_dir() / "zeroshot";
  std::vector<double> ood_conf;
  if (fs::exists(ood_path())) ood_conf = score_teacher(load_store(ood_path()), anchor, tau).confidence;
  write_calibration_outputs(clean, test_store(), ood_conf, bins, dir);
  write_eval_csv({result}, dir / "metrics.csv");
  write_json(eval_to_json(result), dir / "report.json");
  note("zeroshot: accuracy " + format_double(result.splits[0].accuracy) + " ece " +
       format_double(result.splits[0].ece));
  return result;
}

std::vector<probe::TrainResult> Pipeline::train() {
  tensorio::ViewGroup group = tensorio::read_view_group(data_layout(config_).train_group);
  if (config_.dataset.views > group.views()) {
    throw PipelineError("requested " + std::to_string(config_.dataset.views) +
                        " strong views but the group holds " + std::to_string(group.views()));
  }
  group.strong.resize(config_.dataset.views);
  const auto& anchor = anchors();
  const std::string variant = variant_name(config_.train);
  std::vector<probe::TrainResult> results;
  for (std::uint64_t seed : config_.seeds) {
    probe::TrainConfig cfg = config_.train;
    cfg.seed = seed;
    note("train: " + variant + " seed " + std::to_string(seed));
    probe::TrainResult r = probe::train_probe(group, anchor, cfg);
    const fs::path dir = run_dir(seed);
    fs::create_directories(dir);
    probe::write_checkpoint(r.params, dir / "probe.lpce");
    probe::write_history_csv(r.history, dir / "history.csv");
    write_json(probe::config_to_json(cfg), dir / "train_config.json");
    results.push_back(std::move(r));
  }
  write_json(config_to_json(config_), out_dir() / "train" / variant / "resolved_config.json");
  return results;
}

std::vector<ModelEval> Pipeline::eval() {
  const DataLayout layout = data_layout(config_);
  const std::string variant = variant_name(config_.train);
  const std::size_t bins = config_.eval.bins;
  std::vector<tensorio::EmbeddingStore> corrupted;
  for (const auto& cs : config_.eval.corruptions) corrupted.push_back(load_store(layout.corrupt_store(cs)));
  std::optional<tensorio::EmbeddingStore> ood;
  if (fs::exists(ood_path())) ood = load_store(ood_path());

  std::vector<ModelEval> results;
  for (std::uint64_t seed : config_.seeds) {
    const fs::path ckpt = run_dir(seed) / "probe.lpce";
    if (!fs::exists(ckpt)) throw PipelineError("missing checkpoint " + ckpt.string() + " (run train first)");
    const probe::ProbeParams params = probe::read_checkpoint(ckpt);
    ModelEval r{variant, seed, {}};
    const Scored clean = score_probe(test_store(), params);
    r.splits.push_back(split_metrics("clean", clean, test_store(), bins));
    for (std::size_t j = 0; j < corrupted.size(); ++j) {
      r.splits.push_back(split_metrics(config_.eval.corruptions[j].label(),
                                       score_probe(corrupted[j], params), corrupted[j], bins));
    }
    const fs::path dir = out_dir() / "eval" / variant / seed_dir(seed);
    std::vector<double> ood_conf;
    if (ood) ood_conf = score_probe(*ood, params).confidence;
    write_calibration_outputs(clean, test_store(), ood_conf, bins, dir);
    write_json(eval_to_json(r), dir / "report.json");
    note("eval: " + variant + " seed " + std::to_string(seed) + " accuracy " +
         format_double(r.splits[0].accuracy) + " ece " + format_double(r.splits[0].ece));
    results.push_back(std::move(r));
  }
  write_eval_csv(results, out_dir() / "eval" / variant / "metrics.csv");
  return results;
}

std::vector<OodRow> Pipeline::ood() {
  const tensorio::EmbeddingStore ood = load_store(ood_path());
  const std::string variant = variant_name(config_.train);
  const double tau = config_.train.temperature;
  const fs::path base = out_dir() / "ood" / variant;

  auto row = [&](const std::string& model, std::optional<std::uint64_t> seed, const Scored& id,
                 const Scored& out, const fs::path& dir) {
    const metrics::OodReport rep = metrics::ood_report(id.confidence, out.confidence);
    fs::create_directories(dir);
    write_json(metrics::to_json(rep), dir / "ood.json");
    std::ofstream roc = open_csv(dir / "roc.csv");
    roc << "fpr,tpr\n";
    for (const auto& p : rep.roc_points) {
      roc << format_double(p.x) << ',' << format_double(p.y) << '\n';
    }
    std::ofstream pr = open_csv(dir / "pr.csv");
    pr << "recall,precision\n";
    for (const auto& p : rep.pr_points) {
      pr << format_double(p.x) << ',' << format_double(p.y) << '\n';
    }
    note("ood: " + model + (seed ? " seed " + std::to_string(*seed) : "") + " auroc " +
         format_double(rep.auroc) + " fpr95 " + format_double(rep.fpr95));
    return OodRow{model, seed, rep.auroc, rep.aupr, rep.fpr95};
  };

  std::vector<OodRow> rows;
  rows.push_back(row("teacher", std::nullopt, score_teacher(test_store(), anchors(), tau),
                     score_teacher(ood, anchors(), tau), base / "teacher"));
  for (std::uint64_t seed : config_.seeds) {
    const fs::path ckpt = run_dir(seed) / "probe.lpce";
    if (!fs::exists(ckpt)) throw PipelineError("missing checkpoint " + ckpt.string() + " (run train first)");
    const probe::ProbeParams params = probe::read_checkpoint(ckpt);
    rows.push_back(row(variant, seed, score_probe(test_store(), params), score_probe(ood, params),
                       base / seed_dir(seed)));
  }
  write_ood_csv(rows, base / "ood.csv");
  return rows;
}

void Pipeline::plot() {
  const std::string variant = variant_name(config_.train);
  const std::uint64_t seed = config_.seeds.front();
  const std::size_t bins = config_.eval.bins;
  const double tau = config_.train.temperature;
  const fs::path dir = out_dir() / "plots";
  const auto& labels = require_labels(test_store(), "test store");
  std::optional<tensorio::EmbeddingStore> ood;
  if (fs::exists(ood_path())) ood = load_store(ood_path());

  auto emit = [&](const Scored& id, const std::vector<double>& ood_conf, const std::string& who,
                  const fs::path& where) {
    plot::PlotReport rep;
    rep.calibration =
        metrics::calibration_report(id.confidence, correctness(id.labels, labels), ood_conf, bins);
    rep.title = who + " reliability";
    plot::emit_plot(rep, plot::PlotKind::reliability, where / "reliability.svg");
    rep.title = who + " confidence";
    plot::emit_plot(rep, plot::PlotKind::histogram, where / "histogram.svg");
  };

  const Scored teacher = score_teacher(test_store(), anchors(), tau);
  emit(teacher, ood ? score_teacher(*ood, anchors(), tau).confidence : std::vector<double>{}, "teacher",
       dir / "teacher");

  const fs::path ckpt = run_dir(seed) / "probe.lpce";
  if (fs::exists(ckpt)) {
    const probe::ProbeParams params = probe::read_checkpoint(ckpt);
    emit(score_probe(test_store(), params),
         ood ? score_probe(*ood, params).confidence : std::vector<double>{}, variant,
         dir / variant / seed_dir(seed));
  } else {
    note("plot: no checkpoint for " + variant + " seed " + std::to_string(seed) + ", teacher only");
  }

  const MatrixF& test = test_store().matrix;
  const std::size_t extra = ood ? std::min<std::size_t>(ood->rows(), test.rows() / 4) : 0;
  MatrixD points(test.rows() + extra, test.cols());
  plot::PlotReport pca;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    for (std::size_t d = 0; d < test.cols(); ++d) points(i, d) = test(i, d);
    pca.pca_labels.push_back(labels[i]);
  }
  for (std::size_t i = 0; i < extra; ++i) {
    for (std::size_t d = 0; d < test.cols(); ++d) points(test.rows() + i, d) = ood->matrix(i, d);
    pca.pca_labels.push_back(-1);
  }
  pca.pca = metrics::pca_project(points, 2);
  pca.title = "PCA of test embeddings";
  plot::emit_plot(pca, plot::PlotKind::pca, dir / "pca.svg");
  note("plot: figures in " + dir.string());
}

void Pipeline::all() {
  write_resolved_config();
  if (config_.dataset.kind == "toy") synth();
  const ModelEval teacher = zeroshot();
  prompt_select();
  const bool has_ood = fs::exists(ood_path());
  const auto fmt = format_double;
  auto ood_cells = [&](const std::vector<double>& a, const std::vector<double>& p,
                       const std::vector<double>& f) {
    if (!has_ood) return std::string(",,");
    return fmt(mean_std(a).first) + "," + fmt(mean_std(p).first) + "," + fmt(mean_std(f).first);
  };

  const probe::TrainConfig base = config_.train;
  std::vector<std::string> lines;
  std::string teacher_ood = ",,";
  for (const std::string& variant : all_variant_names()) {
    config_.train = variant_config(base, variant);
    train();
    const std::vector<ModelEval> evals = eval();
    std::vector<double> acc, ece, cacc, cece;
    for (const ModelEval& e : evals) {
      acc.push_back(e.splits[0].accuracy);
      ece.push_back(e.splits[0].ece);
      const auto [ca, ce] = corrupted_means(e);
      cacc.push_back(ca);
      cece.push_back(ce);
    }
    std::vector<double> a, p, f;
    if (has_ood) {
      for (const OodRow& r : ood()) {
        if (!r.seed) {
          teacher_ood = ood_cells({r.auroc}, {r.aupr}, {r.fpr95});
          continue;
        }
        a.push_back(r.auroc);
        p.push_back(r.aupr);
        f.push_back(r.fpr95);
      }
    }
    const auto [am, as] = mean_std(acc);
    const auto [em, es] = mean_std(ece);
    lines.push_back(variant + "," + fmt(am) + "," + fmt(as) + "," + fmt(em) + "," + fmt(es) + "," +
                    fmt(mean_std(cacc).first) + "," + fmt(mean_std(cece).first) + "," +
                    ood_cells(a, p, f));
  }
  config_.train = base;

  const auto [tca, tce] = corrupted_means(teacher);
  std::ofstream table = open_csv(out_dir() / "summary" / "table.csv");
  table << "model,accuracy,accuracy_std,ece,ece_std,corrupt_accuracy,corrupt_ece,auroc,aupr,fpr95\n";
  table << "teacher," << fmt(teacher.splits[0].accuracy) << ",0," << fmt(teacher.splits[0].ece) << ",0,"
        << fmt(tca) << ',' << fmt(tce) << ',' << teacher_ood << '\n';
  for (const std::string& line : lines) table << line << '\n';
  table.close();
  plot();
  note("all: summary in " + (out_dir() / "summary" / "table.csv").string());
}

}  // namespace lpclip::cli
