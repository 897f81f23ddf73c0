// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/toyworld.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace lpclip::toyworld {

using augment::Image;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum StreamTag : std::uint64_t {
  kSampleStream = 0x51,
  kOodStream = 0x52,
  kAnchorStream = 0x53,
  kProjectionStream = 0x54,
  kStrongStream = 0x55,
};

/// Shared renderer: a grating (or ring pattern) with per-sample jitter.
Image render(const ToyDatasetSpec& spec, double orientation, double frequency, double hue,
             bool rings, CounterRng& rng) {
  const double j = spec.jitter;
  const double theta = orientation + j * rng.uniform(-1.0, 1.0) * std::numbers::pi / (2.0 * static_cast<double>(spec.classes));
  const double freq = frequency * (1.0 + 0.15 * j * rng.uniform(-1.0, 1.0));
  const double phase = j * rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double shift_u = 0.25 * j * rng.uniform(-1.0, 1.0);
  const double shift_v = 0.25 * j * rng.uniform(-1.0, 1.0);
  std::array<double, 3> gain{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    gain[ch] = 0.55 + 0.35 * std::cos(hue + kTwoPi * static_cast<double>(ch) / 3.0) +
               0.2 * j * rng.uniform(-1.0, 1.0);
  }
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const auto size = static_cast<double>(spec.img_size);

  Image img(spec.img_size, spec.img_size);
  for (std::size_t y = 0; y < spec.img_size; ++y) {
    const double v = (static_cast<double>(y) + 0.5) / size - 0.5 - shift_v;
    for (std::size_t x = 0; x < spec.img_size; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / size - 0.5 - shift_u;
      const double coord = rings ? std::sqrt(u * u + v * v) : u * ct + v * st;
      const double wave = std::sin(kTwoPi * freq * coord + phase);
      const double ramp = 0.5 * (u * std::cos(hue) + v * std::sin(hue));
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double tint = 0.04 * std::cos(hue + kTwoPi * static_cast<double>(ch) / 3.0);
        const double value =
            0.5 + tint + 0.3 * gain[ch] * wave + 0.3 * ramp * (gain[ch] - 0.55);
        img.at(y, x, ch) = static_cast<float>(value + spec.noise_sigma * rng.normal());
      }
    }
  }
  img.clamp();
  return img;
}

}  // namespace

void ToyDatasetSpec::validate() const {
  if (classes < 2) throw ToyError("toy dataset needs at least 2 classes");
  if (per_class < 1) throw ToyError("toy dataset needs at least 1 sample per class");
  if (img_size < augment::kMinAugmentSize) throw ToyError("toy image size must be at least 8");
  if (!(jitter >= 0.0 && jitter <= 1.0)) throw ToyError("jitter must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw ToyError("noise_sigma must be non-negative");
}

void ToyEncoderSpec::validate() const {
  if (dim < 8) throw ToyError("toy encoder dimension must be at least 8");
  if (patch < 1) throw ToyError("toy encoder patch must be positive");
}

Image render_class_sample(const ToyDatasetSpec& spec, std::size_t cls, CounterRng& rng) {
  const double c = static_cast<double>(cls);
  const double n = static_cast<double>(spec.classes);
  const double orientation = std::numbers::pi * c / n;
  const double frequency = 2.0 + 1.5 * static_cast<double>(cls % 3);
  const double hue = kTwoPi * c / n;
  return render(spec, orientation, frequency, hue, false, rng);
}

ToyDataset gen_dataset(const ToyDatasetSpec& spec) {
  spec.validate();
  ToyDataset out;
  const std::size_t total = spec.classes * spec.per_class;
  out.images.reserve(total);
  out.labels.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t cls = i % spec.classes;
    CounterRng rng = CounterRng::derive(spec.seed, {kSampleStream, i});
    out.images.push_back(render_class_sample(spec, cls, rng));
    out.labels.push_back(static_cast<std::int64_t>(cls));
  }
  return out;
}

ToyDataset gen_ood_dataset(const ToyDatasetSpec& spec, std::size_t count) {
  spec.validate();
  ToyDataset out;
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng = CounterRng::derive(spec.seed, {kOodStream, i});
    const double frequency = 1.5 + 3.0 * rng.uniform();
    const double hue = kTwoPi * rng.uniform();
    out.images.push_back(render(spec, 0.0, frequency, hue, true, rng));
    out.labels.push_back(-1);
  }
  return out;
}

std::vector<std::string> toy_class_names(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("grating_" + std::to_string(c));
  return names;
}

ToyEncoder::ToyEncoder(const ToyEncoderSpec& spec)
    : spec_(spec), patch_dim_(spec.patch * spec.patch * Image::kChannels) {
  spec_.validate();
  projection_.resize(spec_.dim * patch_dim_);
  CounterRng rng = CounterRng::derive(spec_.seed, {kProjectionStream});
  const double scale = 1.0 / std::sqrt(static_cast<double>(patch_dim_));
  for (double& w : projection_) w = rng.normal() * scale;
  offsets_.resize(spec_.dim);
  for (double& b : offsets_) b = rng.uniform(-1.0, 1.0);
}

std::vector<float> ToyEncoder::encode(const Image& img) const {
  if (img.height() != img.width()) throw ToyError("toy encoder needs square images");
  if (img.height() % spec_.patch != 0) throw ToyError("patch size must divide the image side");
  constexpr double kGain = 3.0;
  const std::size_t tiles = img.height() / spec_.patch;
  std::vector<double> pooled(spec_.dim, 0.0);
  std::vector<double> tile(patch_dim_);
  for (std::size_t ty = 0; ty < tiles; ++ty) {
    for (std::size_t tx = 0; tx < tiles; ++tx) {
      std::size_t k = 0;
      std::array<double, Image::kChannels> tile_mean{};
      for (std::size_t y = 0; y < spec_.patch; ++y) {
        for (std::size_t x = 0; x < spec_.patch; ++x) {
          for (std::size_t c = 0; c < Image::kChannels; ++c) {
            tile[k] = img.at(ty * spec_.patch + y, tx * spec_.patch + x, c);
            tile_mean[c] += tile[k++];
          }
        }
      }
      for (double& m : tile_mean) m /= static_cast<double>(spec_.patch * spec_.patch);
      for (std::size_t i = 0; i < patch_dim_; ++i) tile[i] -= tile_mean[i % Image::kChannels];
      for (std::size_t d = 0; d < spec_.dim; ++d) {
        const double* w = projection_.data() + d * patch_dim_;
        double acc = 0.0;
        for (std::size_t i = 0; i < patch_dim_; ++i) acc += w[i] * tile[i];
        pooled[d] += std::tanh(kGain * acc + offsets_[d]) - std::tanh(offsets_[d]);
      }
    }
  }
  double sq = 0.0;
  for (double v : pooled) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0)) throw ToyError("degenerate embedding (zero pooled feature)");
  std::vector<float> out(spec_.dim);
  for (std::size_t d = 0; d < spec_.dim; ++d) out[d] = static_cast<float>(pooled[d] / norm);
  return out;
}

MatrixF ToyEncoder::encode_all(std::span<const Image> images) const {
  MatrixF out(images.size(), spec_.dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::vector<float> z = encode(images[i]);
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

std::vector<float> toy_encode(const Image& img, const ToyEncoderSpec& spec) {
  return ToyEncoder(spec).encode(img);
}

MatrixF encode_weak(std::span<const Image> images, const ToyEncoder& encoder, std::size_t img_size) {
  MatrixF out(images.size(), encoder.spec().dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::vector<float> z = encoder.encode(augment::weak_augment(images[i], img_size));
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

MatrixF encode_strong(std::span<const Image> images, const ToyEncoder& encoder,
                      std::size_t img_size, std::size_t view, std::uint64_t seed) {
  MatrixF out(images.size(), encoder.spec().dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    CounterRng rng = CounterRng::derive(seed, {kStrongStream, view, i});
    const std::vector<float> z = encoder.encode(augment::strong_augment(images[i], img_size, rng));
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

zeroshot::PromptBank build_class_prompt_bank(const ToyDatasetSpec& spec, const ToyEncoderSpec& enc,
                                             std::size_t prompts, std::size_t anchor_samples) {
  spec.validate();
  if (prompts < 1) throw ToyError("prompt bank needs at least one prompt");
  if (anchor_samples < 1) throw ToyError("prompt anchors need at least one sample");
  const ToyEncoder encoder(enc);
  std::vector<double> values;
  values.reserve(spec.classes * prompts * enc.dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t p = 0; p < prompts; ++p) {
      std::vector<double> mean(enc.dim, 0.0);
      for (std::size_t s = 0; s < anchor_samples; ++s) {
        CounterRng rng = CounterRng::derive(spec.seed, {kAnchorStream, p, c, s});
        const Image img = augment::weak_augment(render_class_sample(spec, c, rng), spec.img_size);
        const std::vector<float> z = encoder.encode(img);
        for (std::size_t d = 0; d < enc.dim; ++d) mean[d] += z[d];
      }
      double sq = 0.0;
      for (double v : mean) sq += v * v;
      const double norm = std::sqrt(sq);
      for (double v : mean) values.push_back(v / norm);
    }
  }
  std::vector<std::string> texts;
  for (std::size_t p = 0; p < prompts; ++p) texts.push_back("toy prompt " + std::to_string(p));
  return zeroshot::PromptBank(spec.classes, prompts, enc.dim, std::move(values), std::move(texts));
}

}  // namespace lpclip::toyworld
