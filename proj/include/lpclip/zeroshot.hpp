// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Zero-shot teacher: prompt ensembling into class anchors, cosine logits,
/// temperature softmax and pseudo-labels.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpclip/matrix.hpp"
#include "lpclip/tensorio.hpp"

namespace lpclip::zeroshot {

inline constexpr double kDefaultTemperature = 0.01;

class ZeroShotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// C x P x D prompt-level text embeddings, class-major.
class PromptBank {
 public:
  PromptBank(std::size_t classes, std::size_t prompts, std::size_t dim, std::vector<double> values,
             std::vector<std::string> prompt_texts = {});

  std::size_t classes() const noexcept { return classes_; }
  std::size_t prompts() const noexcept { return prompts_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> embedding(std::size_t cls, std::size_t prompt) const noexcept {
    return {values_.data() + (cls * prompts_ + prompt) * dim_, dim_};
  }
  const std::vector<std::string>& prompt_texts() const noexcept { return prompt_texts_; }

  /// Rows are (class, prompt) pairs; `prompt_count` in the manifest gives P.
  static PromptBank from_store(const tensorio::EmbeddingStore& store);
  tensorio::EmbeddingStore to_store(std::vector<std::string> class_names) const;

 private:
  std::size_t classes_;
  std::size_t prompts_;
  std::size_t dim_;
  std::vector<double> values_;
  std::vector<std::string> prompt_texts_;
};

struct EnsembleMode {
  enum class Kind { single, mean };
  Kind kind = Kind::mean;
  std::size_t prompt = 0;

  static EnsembleMode mean() noexcept { return {Kind::mean, 0}; }
  static EnsembleMode single(std::size_t p) noexcept { return {Kind::single, p}; }
};

/// C x D, rows unit-norm.
struct ClassAnchors {
  MatrixD matrix;

  std::size_t classes() const noexcept { return matrix.rows(); }
  std::size_t dim() const noexcept { return matrix.cols(); }
};

/// single(p) picks prompt p per class; mean averages the unit prompt vectors
/// per class. Both renormalize.
ClassAnchors ensemble_class_embeddings(const PromptBank& bank, EnsembleMode mode);

/// out[i][c] = <embs[i], anchors[c]>.
MatrixD compute_logits(const MatrixF& embs, const ClassAnchors& anchors);
/// Same, but refuses stores without the unit-norm flag.
MatrixD compute_logits(const tensorio::EmbeddingStore& store, const ClassAnchors& anchors);

struct TeacherOutput {
  MatrixD logits;
  MatrixD probs;
  std::vector<std::size_t> pseudo_label;
  std::vector<double> confidence;
  double temperature = kDefaultTemperature;

  std::size_t samples() const noexcept { return pseudo_label.size(); }
};

TeacherOutput teacher_predict(const MatrixD& logits, double temperature = kDefaultTemperature);

struct PromptSelection {
  std::size_t best = 0;
  std::vector<double> accuracy;
};

/// Zero-shot accuracy of every single-prompt anchor set on a labelled
/// evaluation set; best index ties resolve low.
PromptSelection select_best_prompt(const PromptBank& bank, const MatrixF& embs,
                                   std::span<const std::int64_t> labels,
                                   double temperature = kDefaultTemperature);

/// `prompt_index,accuracy` rows.
void write_prompt_accuracy_csv(const PromptSelection& selection, const std::filesystem::path& path);

}  // namespace lpclip::zeroshot
