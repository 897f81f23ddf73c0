// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Deterministic synthetic image world and random-feature encoder, so the
/// whole pipeline runs without a pretrained model.
///
/// Class c is an oriented sinusoidal grating with a class-specific
/// orientation, frequency and colour; samples jitter those parameters and
/// add pixel noise. The encoder projects 'patch x patch' tiles through a
/// fixed gaussian matrix, applies tanh, mean-pools over tiles and
/// L2-normalises.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpclip/augment.hpp"
#include "lpclip/matrix.hpp"
#include "lpclip/zeroshot.hpp"

namespace lpclip::toyworld {

class ToyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ToyDatasetSpec {
  std::size_t classes = 10;
  std::size_t per_class = 200;
  std::size_t img_size = 32;
  double jitter = 0.3;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
};

struct ToyEncoderSpec {
  std::size_t dim = 64;
  std::size_t patch = 8;
  std::uint64_t seed = 1234;

  void validate() const;
};

struct ToyDataset {
  std::vector<augment::Image> images;
  std::vector<std::int64_t> labels;
};

/// Sample `index` uses stream (seed, index); labels cycle 0..C-1.
ToyDataset gen_dataset(const ToyDatasetSpec& spec);

/// Images from a disjoint pattern family (concentric rings), unlabeled.
ToyDataset gen_ood_dataset(const ToyDatasetSpec& spec, std::size_t count);

augment::Image render_class_sample(const ToyDatasetSpec& spec, std::size_t cls, CounterRng& rng);

std::vector<std::string> toy_class_names(std::size_t classes);

class ToyEncoder {
 public:
  explicit ToyEncoder(const ToyEncoderSpec& spec);

  const ToyEncoderSpec& spec() const noexcept { return spec_; }
  std::vector<float> encode(const augment::Image& img) const;
  MatrixF encode_all(std::span<const augment::Image> images) const;

 private:
  ToyEncoderSpec spec_;
  std::size_t patch_dim_;
  std::vector<double> projection_;  // dim x patch_dim
  std::vector<double> offsets_;
};

std::vector<float> toy_encode(const augment::Image& img, const ToyEncoderSpec& spec);

/// Weak view of every image, encoded.
MatrixF encode_weak(std::span<const augment::Image> images, const ToyEncoder& encoder,
                    std::size_t img_size);

/// Strong view `view` of every image; image i uses stream (seed, view, i).
MatrixF encode_strong(std::span<const augment::Image> images, const ToyEncoder& encoder,
                      std::size_t img_size, std::size_t view, std::uint64_t seed);

/// Per class and prompt: mean embedding of `anchor_samples` fresh weakly
/// augmented class samples drawn from a prompt-specific stream, renormalised.
zeroshot::PromptBank build_class_prompt_bank(const ToyDatasetSpec& spec, const ToyEncoderSpec& enc,
                                             std::size_t prompts, std::size_t anchor_samples);

}  // namespace lpclip::toyworld
