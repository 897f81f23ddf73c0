// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/probe.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "lpclip/numeric.hpp"
#include "lpclip/rng.hpp"

namespace lpclip::probe {

using nlohmann::json;

void TrainConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw ProbeError(std::string(field) + " " + why);
  };
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) fail("lr0", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    fail("weight_decay", "must be non-negative");
  }
  if (total_steps == 0) fail("total_steps", "must be positive");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (!(clip_norm > 0.0)) fail("clip_norm", "must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) fail("temperature", "must be positive");
}

json config_to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"total_steps", c.total_steps},
          {"batch_size", c.batch_size},
          {"clip_norm", c.clip_norm},
          {"temperature", c.temperature},
          {"seed", c.seed},
          {"strong_view_policy",
           c.strong_view_policy == StrongViewPolicy::cycle ? "cycle" : "uniform_random"},
          {"confidence_weighting", c.confidence_weighting},
          {"strong_augmentation", c.strong_augmentation}};
}

TrainConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ProbeError("train config must be an object");
  static const std::set<std::string> known{
      "lr0",         "momentum", "weight_decay",       "total_steps",          "batch_size",
      "clip_norm",   "temperature", "seed",            "strong_view_policy",   "confidence_weighting",
      "strong_augmentation"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ProbeError(key + " is not a recognised train field");
  }
  TrainConfig c;
  auto read = [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    try {
      using Field = std::remove_reference_t<decltype(field)>;
      const json& v = doc.at(key);
      if constexpr (std::is_unsigned_v<Field> && !std::is_same_v<Field, bool>) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
          throw ProbeError(std::string(key) + " must be a non-negative integer");
        }
      }
      field = v.get<Field>();
    } catch (const json::exception&) {
      throw ProbeError(std::string(key) + " has the wrong type");
    }
  };
  read("lr0", c.lr0);
  read("momentum", c.momentum);
  read("weight_decay", c.weight_decay);
  read("total_steps", c.total_steps);
  read("batch_size", c.batch_size);
  read("clip_norm", c.clip_norm);
  read("temperature", c.temperature);
  read("seed", c.seed);
  read("confidence_weighting", c.confidence_weighting);
  read("strong_augmentation", c.strong_augmentation);
  if (doc.contains("strong_view_policy")) {
    const json& v = doc.at("strong_view_policy");
    if (v == "cycle") {
      c.strong_view_policy = StrongViewPolicy::cycle;
    } else if (v == "uniform_random") {
      c.strong_view_policy = StrongViewPolicy::uniform_random;
    } else {
      throw ProbeError("strong_view_policy must be \"cycle\" or \"uniform_random\"");
    }
  }
  c.validate();
  return c;
}

ProbeParams init_probe(std::size_t dim, std::size_t classes) {
  if (dim == 0 || classes == 0) throw ProbeError("probe needs D >= 1 and C >= 1");
  return ProbeParams{MatrixD(classes, dim, 0.0), std::vector<double>(classes, 0.0)};
}

OptimizerState init_optimizer(const ProbeParams& params) {
  return OptimizerState{MatrixD(params.classes(), params.dim(), 0.0),
                        std::vector<double>(params.classes(), 0.0), 0};
}

LossAndGrad consistency_loss(std::span<const double> student_logits, std::size_t pseudo_label,
                             double confidence) {
  LossAndGrad out;
  out.grad.assign(student_logits.size(), 0.0);
  if (confidence == 0.0) return out;
  const double lse = log_sum_exp(student_logits);
  out.loss = -confidence * (student_logits[pseudo_label] - lse);
  for (std::size_t c = 0; c < student_logits.size(); ++c) {
    const double p = std::exp(student_logits[c] - lse);
    out.grad[c] = confidence * (p - (c == pseudo_label ? 1.0 : 0.0));
  }
  return out;
}

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr0) {
  if (step == 0) return lr0;
  if (step >= total_steps) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double clip_global_norm(ProbeGrads& grads, double clip_norm) {
  double sq = 0.0;
  for (double g : grads.weights.values()) sq += g * g;
  for (double g : grads.bias) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw ProbeError("diverged: non-finite gradient");
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& g : grads.weights.values()) g *= scale;
    for (double& g : grads.bias) g *= scale;
  }
  return norm;
}

void sgd_step_with_clip(ProbeParams& params, ProbeGrads grads, OptimizerState& state, double lr,
                        const TrainConfig& config) {
  if (grads.weights.rows() != params.classes() || grads.weights.cols() != params.dim() ||
      grads.bias.size() != params.classes() ||
      state.velocity_weights.rows() != params.classes() ||
      state.velocity_weights.cols() != params.dim() ||
      state.velocity_bias.size() != params.classes()) {
    throw ProbeError("gradient / optimizer state shape does not match probe");
  }
  clip_global_norm(grads, config.clip_norm);

  auto update = [&](std::span<double> param, std::span<const double> grad,
                    std::span<double> velocity) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i] + config.weight_decay * param[i];
      velocity[i] = config.momentum * velocity[i] + g;
      param[i] -= lr * velocity[i];
    }
  };
  update(params.weights.values(), grads.weights.values(), state.velocity_weights.values());
  update(params.bias, grads.bias, state.velocity_bias);
  ++state.step;
}

std::vector<double> probe_logits(const ProbeParams& params, std::span<const float> embedding) {
  if (embedding.size() != params.dim()) {
    throw ProbeError("dimension mismatch: embedding D=" + std::to_string(embedding.size()) +
                     ", probe D=" + std::to_string(params.dim()));
  }
  std::vector<double> logits(params.bias);
  for (std::size_t c = 0; c < params.classes(); ++c) {
    const auto w = params.weights.row(c);
    double acc = 0.0;
    for (std::size_t d = 0; d < embedding.size(); ++d) acc += w[d] * embedding[d];
    logits[c] += acc;
  }
  return logits;
}

TrainResult train_probe(const tensorio::ViewGroup& group, const zeroshot::ClassAnchors& anchors,
                        const TrainConfig& config, const StepObserver& observer) {
  if (anchors.dim() != group.dim()) {
    throw ProbeError("dimension mismatch: anchors D=" + std::to_string(anchors.dim()) +
                     ", view group D=" + std::to_string(group.dim()));
  }
  const zeroshot::TeacherOutput teacher =
      zeroshot::teacher_predict(zeroshot::compute_logits(group.weak.matrix, anchors),
                                config.temperature);
  return train_with_teacher(group, teacher, config, observer);
}

TrainResult train_with_teacher(const tensorio::ViewGroup& group,
                               const zeroshot::TeacherOutput& teacher, const TrainConfig& config,
                               const StepObserver& observer) {
  config.validate();
  const std::size_t samples = group.samples();
  if (samples == 0) throw ProbeError("zero-length dataset");
  if (teacher.samples() != samples) throw ProbeError("teacher output does not cover the dataset");
  const std::size_t classes = teacher.probs.cols();
  const std::size_t dim = group.dim();

  const bool use_strong = config.strong_augmentation && group.views() > 0;
  const std::size_t views = group.views();

  ProbeParams params = init_probe(dim, classes);
  OptimizerState state = init_optimizer(params);
  CounterRng rng = CounterRng::derive(config.seed, {0x7072});
  std::uint64_t draws = 0;

  TrainResult result;
  result.history.reserve(config.total_steps);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  for (std::uint64_t step = 0; step < config.total_steps; ++step) {
    ProbeGrads grads = init_probe(dim, classes);
    double batch_loss = 0.0;
    for (std::uint64_t b = 0; b < config.batch_size; ++b, ++draws) {
      const std::size_t i = rng.index(samples);
      const MatrixF* source = &group.weak.matrix;
      if (use_strong) {
        const std::size_t view = config.strong_view_policy == StrongViewPolicy::cycle
                                     ? draws % views
                                     : rng.index(views);
        source = &group.strong[view].matrix;
      }
      const auto z = source->row(i);
      const double weight = config.confidence_weighting ? teacher.confidence[i] : 1.0;
      const LossAndGrad lg = consistency_loss(probe_logits(params, z), teacher.pseudo_label[i], weight);
      batch_loss += lg.loss;
      if (weight == 0.0) continue;
      for (std::size_t c = 0; c < classes; ++c) {
        const double g = lg.grad[c] * inv_batch;
        auto w = grads.weights.row(c);
        for (std::size_t d = 0; d < dim; ++d) w[d] += g * z[d];
        grads.bias[c] += g;
      }
    }
    const StepRecord record{step, cosine_lr(step, config.total_steps, config.lr0),
                            batch_loss * inv_batch};
    sgd_step_with_clip(params, std::move(grads), state, record.lr, config);
    result.history.push_back(record);
    if (observer) observer(record, params);
  }
  result.params = std::move(params);
  return result;
}

Prediction predict_probe(const ProbeParams& params, const MatrixF& embs) {
  if (embs.cols() != params.dim()) {
    throw ProbeError("dimension mismatch: embeddings D=" + std::to_string(embs.cols()) +
                     ", probe D=" + std::to_string(params.dim()));
  }
  Prediction out;
  out.probs = MatrixD(embs.rows(), params.classes());
  out.labels.resize(embs.rows());
  out.confidence.resize(embs.rows());
  for (std::size_t i = 0; i < embs.rows(); ++i) {
    const std::vector<double> logits = probe_logits(params, embs.row(i));
    softmax(logits, 1.0, out.probs.row(i));
    out.labels[i] = argmax(out.probs.row(i));
    out.confidence[i] = out.probs(i, out.labels[i]);
  }
  return out;
}

void write_checkpoint(const ProbeParams& params, const std::filesystem::path& path) {
  std::vector<float> flat;
  flat.reserve(params.weights.size() + params.bias.size());
  for (double w : params.weights.values()) flat.push_back(static_cast<float>(w));
  for (double b : params.bias) flat.push_back(static_cast<float>(b));
  tensorio::Manifest manifest;
  manifest.source = "lpclip probe checkpoint";
  manifest.probe = tensorio::ProbeShape{params.classes(), params.dim(), true};
  const std::size_t width = flat.size();
  tensorio::write_store(MatrixF(1, width, std::move(flat)), manifest, path);
}

ProbeParams read_checkpoint(const std::filesystem::path& path) {
  const tensorio::EmbeddingStore store = tensorio::read_store(path);
  if (!store.manifest.probe) throw ProbeError("store is not a probe checkpoint: " + path.string());
  const auto [classes, dim, bias] = *store.manifest.probe;
  if (!bias) throw ProbeError("checkpoints without bias are not supported");
  if (store.rows() != 1 || store.cols() != classes * dim + classes) {
    throw ProbeError("checkpoint shape does not match its probe manifest");
  }
  ProbeParams params = init_probe(dim, classes);
  const auto values = store.matrix.row(0);
  for (std::size_t i = 0; i < classes * dim; ++i) params.weights.values()[i] = values[i];
  for (std::size_t c = 0; c < classes; ++c) params.bias[c] = values[classes * dim + c];
  return params;
}

void write_history_csv(std::span<const StepRecord> history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ProbeError("cannot open " + path.string());
  out << "step,lr,loss\n";
  for (const StepRecord& r : history) {
    out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.loss) << '\n';
  }
}

}  // namespace lpclip::probe
