// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Linear probe distilled from the zero-shot teacher.
///
/// Every sample contributes the confidence-weighted cross-entropy
///
///   loss = -phi * log softmax(student_logits)[pseudo_label]
///
/// where the pseudo-label and its confidence phi come from the teacher on the
/// weak view and the student logits come from the probe on a strong view.
/// Batches average the per-sample losses. Optimization is SGD with velocity
/// momentum (v = m*v + g; p = p - lr*v), global-norm clipping and a cosine
/// schedule.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpclip/matrix.hpp"
#include "lpclip/tensorio.hpp"
#include "lpclip/zeroshot.hpp"

namespace lpclip::probe {

class ProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProbeParams {
  MatrixD weights;  // C x D
  std::vector<double> bias;

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }

  friend bool operator==(const ProbeParams&, const ProbeParams&) = default;
};

/// Gradients share the parameter layout.
using ProbeGrads = ProbeParams;

struct OptimizerState {
  MatrixD velocity_weights;
  std::vector<double> velocity_bias;
  std::uint64_t step = 0;
};

enum class StrongViewPolicy { cycle, uniform_random };

struct TrainConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t total_steps = 15000;
  std::uint64_t batch_size = 64;
  double clip_norm = 1.0;
  double temperature = zeroshot::kDefaultTemperature;
  std::uint64_t seed = 42;
  StrongViewPolicy strong_view_policy = StrongViewPolicy::uniform_random;
  /// false forces every confidence weight to 1.
  bool confidence_weighting = true;
  /// false trains the student on the weak view, as with K = 0.
  bool strong_augmentation = true;

  /// Throws ProbeError naming the offending field.
  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& config);
/// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& doc);

ProbeParams init_probe(std::size_t dim, std::size_t classes);
OptimizerState init_optimizer(const ProbeParams& params);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d student logits
};

LossAndGrad consistency_loss(std::span<const double> student_logits, std::size_t pseudo_label,
                             double confidence);

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr0);

/// Scales `grads` in place so their global norm is at most `clip_norm`.
/// Returns the norm before clipping.
double clip_global_norm(ProbeGrads& grads, double clip_norm);

void sgd_step_with_clip(ProbeParams& params, ProbeGrads grads, OptimizerState& state, double lr,
                        const TrainConfig& config);

/// W z + b for one embedding.
std::vector<double> probe_logits(const ProbeParams& params, std::span<const float> embedding);

struct StepRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ProbeParams params;
  std::vector<StepRecord> history;
};

/// Called after every optimizer step with the updated parameters.
using StepObserver = std::function<void(const StepRecord&, const ProbeParams&)>;

/// Full loop: the frozen teacher labels the weak view once, then the probe
/// is fitted on strong views.
TrainResult train_probe(const tensorio::ViewGroup& group, const zeroshot::ClassAnchors& anchors,
                        const TrainConfig& config, const StepObserver& observer = {});

/// Loop with precomputed teacher outputs.
TrainResult train_with_teacher(const tensorio::ViewGroup& group,
                               const zeroshot::TeacherOutput& teacher, const TrainConfig& config,
                               const StepObserver& observer = {});

struct Prediction {
  std::vector<std::size_t> labels;
  MatrixD probs;
  std::vector<double> confidence;
};

Prediction predict_probe(const ProbeParams& params, const MatrixF& embs);

/// Checkpoint: one row of C*D weights followed by C biases.
void write_checkpoint(const ProbeParams& params, const std::filesystem::path& path);
ProbeParams read_checkpoint(const std::filesystem::path& path);

/// `step,lr,loss` rows.
void write_history_csv(std::span<const StepRecord> history, const std::filesystem::path& path);

}  // namespace lpclip::probe
