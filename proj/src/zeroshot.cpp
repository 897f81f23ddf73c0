// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/zeroshot.hpp"

#include <cmath>
#include <fstream>

#include "lpclip/numeric.hpp"

namespace lpclip::zeroshot {

namespace {

constexpr double kDegenerateNorm = 1e-6;

double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

PromptBank::PromptBank(std::size_t classes, std::size_t prompts, std::size_t dim,
                       std::vector<double> values, std::vector<std::string> prompt_texts)
    : classes_(classes),
      prompts_(prompts),
      dim_(dim),
      values_(std::move(values)),
      prompt_texts_(std::move(prompt_texts)) {
  if (classes_ < 2) throw ZeroShotError("prompt bank needs at least 2 classes");
  if (prompts_ < 1) throw ZeroShotError("prompt bank needs at least 1 prompt");
  if (dim_ < 1) throw ZeroShotError("prompt bank dimension must be positive");
  if (values_.size() != classes_ * prompts_ * dim_) {
    throw ZeroShotError("prompt bank size does not match C x P x D");
  }
  if (!prompt_texts_.empty() && prompt_texts_.size() != prompts_) {
    throw ZeroShotError("prompt text count does not match P");
  }
  for (std::size_t c = 0; c < classes_; ++c) {
    for (std::size_t p = 0; p < prompts_; ++p) {
      if (std::fabs(norm(embedding(c, p)) - 1.0) > tensorio::kUnitNormTolerance) {
        throw ZeroShotError("prompt embedding (" + std::to_string(c) + ", " + std::to_string(p) +
                            ") is not unit-norm");
      }
    }
  }
}

PromptBank PromptBank::from_store(const tensorio::EmbeddingStore& store) {
  const auto& m = store.manifest;
  if (!m.prompt_count || *m.prompt_count == 0) {
    throw ZeroShotError("prompt bank store lacks manifest field prompt_count");
  }
  const std::size_t prompts = *m.prompt_count;
  if (store.rows() % prompts != 0) {
    throw ZeroShotError("prompt bank rows not divisible by prompt_count");
  }
  const std::size_t classes = store.rows() / prompts;
  if (!m.class_names.empty() && m.class_names.size() != classes) {
    throw ZeroShotError("prompt bank class_names length does not match rows / prompt_count");
  }
  std::vector<double> values(store.matrix.values().begin(), store.matrix.values().end());
  return PromptBank(classes, prompts, store.cols(), std::move(values), m.prompt_texts);
}

tensorio::EmbeddingStore PromptBank::to_store(std::vector<std::string> class_names) const {
  tensorio::EmbeddingStore store;
  std::vector<float> values(values_.begin(), values_.end());
  store.matrix = MatrixF(classes_ * prompts_, dim_, std::move(values));
  store.manifest.class_names = std::move(class_names);
  store.manifest.prompt_count = prompts_;
  store.manifest.prompt_texts = prompt_texts_;
  store.header.rows = store.matrix.rows();
  store.header.cols = store.matrix.cols();
  return store;
}

ClassAnchors ensemble_class_embeddings(const PromptBank& bank, EnsembleMode mode) {
  if (mode.kind == EnsembleMode::Kind::single && mode.prompt >= bank.prompts()) {
    throw ZeroShotError("prompt index " + std::to_string(mode.prompt) + " out of range");
  }
  ClassAnchors anchors{MatrixD(bank.classes(), bank.dim())};
  for (std::size_t c = 0; c < bank.classes(); ++c) {
    std::span<double> out = anchors.matrix.row(c);
    if (mode.kind == EnsembleMode::Kind::single) {
      const auto e = bank.embedding(c, mode.prompt);
      std::copy(e.begin(), e.end(), out.begin());
    } else {
      for (std::size_t p = 0; p < bank.prompts(); ++p) {
        const auto e = bank.embedding(c, p);
        const double n = norm(e);
        for (std::size_t d = 0; d < bank.dim(); ++d) out[d] += e[d] / n;
      }
      for (double& v : out) v /= static_cast<double>(bank.prompts());
    }
    const double n = norm(out);
    if (n < kDegenerateNorm) {
      throw ZeroShotError("degenerate ensemble for class " + std::to_string(c));
    }
    for (double& v : out) v /= n;
  }
  return anchors;
}

MatrixD compute_logits(const MatrixF& embs, const ClassAnchors& anchors) {
  if (embs.cols() != anchors.dim()) {
    throw ZeroShotError("dimension mismatch: embeddings D=" + std::to_string(embs.cols()) +
                        ", anchors D=" + std::to_string(anchors.dim()));
  }
  MatrixD logits(embs.rows(), anchors.classes());
  for (std::size_t i = 0; i < embs.rows(); ++i) {
    const auto z = embs.row(i);
    for (std::size_t c = 0; c < anchors.classes(); ++c) {
      const auto a = anchors.matrix.row(c);
      double dot = 0.0;
      for (std::size_t d = 0; d < z.size(); ++d) dot += static_cast<double>(z[d]) * a[d];
      logits(i, c) = dot;
    }
  }
  return logits;
}

MatrixD compute_logits(const tensorio::EmbeddingStore& store, const ClassAnchors& anchors) {
  if (!store.unit_norm()) throw ZeroShotError("embedding store is not flagged unit-norm");
  return compute_logits(store.matrix, anchors);
}

TeacherOutput teacher_predict(const MatrixD& logits, double temperature) {
  if (!(temperature > 0.0)) throw ZeroShotError("temperature must be positive");
  TeacherOutput out;
  out.temperature = temperature;
  out.logits = logits;
  out.probs = MatrixD(logits.rows(), logits.cols());
  out.pseudo_label.resize(logits.rows());
  out.confidence.resize(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (double v : logits.row(i)) {
      if (!std::isfinite(v)) throw ZeroShotError("non-finite logit in row " + std::to_string(i));
    }
    softmax(logits.row(i), 1.0 / temperature, out.probs.row(i));
    const std::size_t label = argmax(out.probs.row(i));
    out.pseudo_label[i] = label;
    out.confidence[i] = out.probs(i, label);
  }
  return out;
}

PromptSelection select_best_prompt(const PromptBank& bank, const MatrixF& embs,
                                   std::span<const std::int64_t> labels, double temperature) {
  if (labels.size() != embs.rows()) throw ZeroShotError("label count does not match samples");
  if (labels.empty()) throw ZeroShotError("selection requires at least one sample");
  for (std::int64_t y : labels) {
    if (y < 0) throw ZeroShotError("selection requires labels");
    if (static_cast<std::size_t>(y) >= bank.classes()) {
      throw ZeroShotError("label " + std::to_string(y) + " outside class range");
    }
  }
  PromptSelection selection;
  for (std::size_t p = 0; p < bank.prompts(); ++p) {
    const ClassAnchors anchors = ensemble_class_embeddings(bank, EnsembleMode::single(p));
    const TeacherOutput teacher = teacher_predict(compute_logits(embs, anchors), temperature);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      hits += teacher.pseudo_label[i] == static_cast<std::size_t>(labels[i]) ? 1 : 0;
    }
    selection.accuracy.push_back(static_cast<double>(hits) / static_cast<double>(labels.size()));
    if (selection.accuracy.back() > selection.accuracy[selection.best]) selection.best = p;
  }
  return selection;
}

void write_prompt_accuracy_csv(const PromptSelection& selection, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ZeroShotError("cannot open " + path.string());
  out << "prompt_index,accuracy\n";
  for (std::size_t p = 0; p < selection.accuracy.size(); ++p) {
    out << p << ',' << format_double(selection.accuracy[p]) << '\n';
  }
}

}  // namespace lpclip::zeroshot
