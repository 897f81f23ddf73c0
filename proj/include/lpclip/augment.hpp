// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Image-space transforms: the deterministic weak (teacher) view, the
/// stochastic strong (student) view and severity-graded corruptions.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lpclip/rng.hpp"

namespace lpclip::augment {

class AugmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// H x W x 3 float pixels in [0, 1], interleaved channels.
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image() = default;
  Image(std::size_t height, std::size_t width, float fill = 0.0f);
  Image(std::size_t height, std::size_t width, std::vector<float> pixels);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }

  float& at(std::size_t y, std::size_t x, std::size_t c) noexcept {
    return pixels_[(y * width_ + x) * kChannels + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const noexcept {
    return pixels_[(y * width_ + x) * kChannels + c];
  }

  std::span<float> pixels() noexcept { return pixels_; }
  std::span<const float> pixels() const noexcept { return pixels_; }

  void clamp() noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> pixels_;
};

using AugmentRng = CounterRng;

inline constexpr std::size_t kMinAugmentSize = 8;
inline constexpr int kRandAugmentOps = 2;
inline constexpr int kRandAugmentMagnitude = 9;
inline constexpr double kRandAugmentMaxMagnitude = 30.0;
inline constexpr std::size_t kCropPadding = 4;

/// Half-pixel-centred bilinear resampling (align_corners = false).
Image resize_bilinear(const Image& img, std::size_t height, std::size_t width);
/// Resizes so the short side equals `size`, keeping aspect ratio.
Image resize_short_side(const Image& img, std::size_t size);
Image center_crop(const Image& img, std::size_t size);
Image hflip(const Image& img);

/// Short-side resize then centre crop; no randomness.
Image weak_augment(const Image& img, std::size_t out_size);

Image random_crop_padded(const Image& img, std::size_t size, std::size_t padding, AugmentRng& rng);

enum class RandAugmentOp {
  identity,
  brightness,
  contrast,
  rotate,
  shear_x,
  shear_y,
  translate_x,
  translate_y,
};
inline constexpr std::size_t kRandAugmentOpCount = 8;

/// `level` is the magnitude as a fraction (M / 30); `negate` flips the sign.
Image apply_randaugment_op(const Image& img, RandAugmentOp op, double level, bool negate);
Image rand_augment(const Image& img, AugmentRng& rng, int num_ops = kRandAugmentOps,
                   int magnitude = kRandAugmentMagnitude);

/// Zeroes a `patch` x `patch` square centred at (cy, cx), clipped to the image.
Image cutout_at(const Image& img, std::size_t patch, std::size_t cy, std::size_t cx);
Image cutout(const Image& img, std::size_t patch, AugmentRng& rng);

/// Resize, padded random crop, flip, RandAugment, Cutout.
Image strong_augment(const Image& img, std::size_t out_size, AugmentRng& rng);

enum class CorruptionKind {
  gaussian_noise,
  shot_noise,
  impulse_noise,
  gaussian_blur,
  brightness,
  contrast,
  pixelate,
};
inline constexpr std::array<CorruptionKind, 7> kAllCorruptions{
    CorruptionKind::gaussian_noise, CorruptionKind::shot_noise, CorruptionKind::impulse_noise,
    CorruptionKind::gaussian_blur,  CorruptionKind::brightness, CorruptionKind::contrast,
    CorruptionKind::pixelate};

std::string_view corruption_name(CorruptionKind kind);
std::optional<CorruptionKind> corruption_from_name(std::string_view name);
bool is_noise_kind(CorruptionKind kind) noexcept;

/// Severity table value: sigma, photon count, fraction, blur radius, shift,
/// contrast factor or block size.
double severity_parameter(CorruptionKind kind, int severity);

struct CorruptionSpec {
  CorruptionKind kind;
  int severity;

  std::string label() const;  // "gaussian_noise:3"
  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

/// Parses "kind:severity".
CorruptionSpec parse_corruption(std::string_view text);
/// Parses a comma-separated list.
std::vector<CorruptionSpec> parse_corruption_list(std::string_view text);

Image corrupt(const Image& img, CorruptionKind kind, int severity, AugmentRng& rng);

}  // namespace lpclip::augment
