// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/augment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace lpclip::augment {

namespace {

constexpr float lerp(float a, float b, float t) noexcept { return a + (b - a) * t; }

/// Bilinear sample at continuous pixel-index coordinates; outside is zero.
float sample_zero(const Image& img, double fy, double fx, std::size_t c) {
  const double y0f = std::floor(fy);
  const double x0f = std::floor(fx);
  const double ty = fy - y0f;
  const double tx = fx - x0f;
  const auto h = static_cast<long>(img.height());
  const auto w = static_cast<long>(img.width());
  double acc = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    const long y = static_cast<long>(y0f) + dy;
    if (y < 0 || y >= h) continue;
    const double wy = dy == 0 ? 1.0 - ty : ty;
    for (int dx = 0; dx < 2; ++dx) {
      const long x = static_cast<long>(x0f) + dx;
      if (x < 0 || x >= w) continue;
      const double wx = dx == 0 ? 1.0 - tx : tx;
      acc += wy * wx * img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
    }
  }
  return static_cast<float>(acc);
}

/// Inverse-maps output pixel centres through the centred linear map
/// [a b; c d] plus (tx, ty) into the input image.
Image affine_inverse(const Image& img, double a, double b, double c, double d, double tx,
                     double ty) {
  Image out(img.height(), img.width());
  const double cx = static_cast<double>(img.width()) * 0.5;
  const double cy = static_cast<double>(img.height()) * 0.5;
  for (std::size_t y = 0; y < img.height(); ++y) {
    const double v = static_cast<double>(y) + 0.5 - cy;
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double u = static_cast<double>(x) + 0.5 - cx;
      const double su = a * u + b * v + tx + cx - 0.5;
      const double sv = c * u + d * v + ty + cy - 0.5;
      for (std::size_t ch = 0; ch < Image::kChannels; ++ch) {
        out.at(y, x, ch) = sample_zero(img, sv, su, ch);
      }
    }
  }
  return out;
}

void check_severity(int severity) {
  if (severity < 1 || severity > 5) {
    throw AugmentError("severity must be in 1..5, got " + std::to_string(severity));
  }
}

Image gaussian_blur(const Image& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& k : kernel) k /= total;

  const auto h = static_cast<long>(img.height());
  const auto w = static_cast<long>(img.width());
  auto clamp_idx = [](long i, long n) { return static_cast<std::size_t>(std::clamp(i, 0L, n - 1)); };
  Image tmp(img.height(), img.width());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * img.at(static_cast<std::size_t>(y), clamp_idx(x + k, w), c);
        }
        tmp.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = static_cast<float>(acc);
      }
    }
  }
  Image out(img.height(), img.width());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * tmp.at(clamp_idx(y + k, h), static_cast<std::size_t>(x), c);
        }
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image pixelate(const Image& img, std::size_t block) {
  Image out(img.height(), img.width());
  for (std::size_t by = 0; by < img.height(); by += block) {
    for (std::size_t bx = 0; bx < img.width(); bx += block) {
      const std::size_t ey = std::min(by + block, img.height());
      const std::size_t ex = std::min(bx + block, img.width());
      const double count = static_cast<double>((ey - by) * (ex - bx));
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        double sum = 0.0;
        for (std::size_t y = by; y < ey; ++y) {
          for (std::size_t x = bx; x < ex; ++x) sum += img.at(y, x, c);
        }
        const auto mean = static_cast<float>(sum / count);
        for (std::size_t y = by; y < ey; ++y) {
          for (std::size_t x = bx; x < ex; ++x) out.at(y, x, c) = mean;
        }
      }
    }
  }
  return out;
}

}  // namespace

Image::Image(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), pixels_(height * width * kChannels, fill) {
  if (height == 0 || width == 0) throw AugmentError("image dimensions must be positive");
}

Image::Image(std::size_t height, std::size_t width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height == 0 || width == 0) throw AugmentError("image dimensions must be positive");
  if (pixels_.size() != height * width * kChannels) {
    throw AugmentError("pixel buffer does not match H x W x 3");
  }
}

void Image::clamp() noexcept {
  for (float& v : pixels_) v = std::clamp(v, 0.0f, 1.0f);
}

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw AugmentError("resize target must be positive");
  Image out(height, width);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  const double max_y = static_cast<double>(img.height() - 1);
  const double max_x = static_cast<double>(img.width() - 1);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const auto ty = static_cast<float>(fy - static_cast<double>(y0));
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const auto tx = static_cast<float>(fx - static_cast<double>(x0));
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const float top = lerp(img.at(y0, x0, c), img.at(y0, x1, c), tx);
        const float bottom = lerp(img.at(y1, x0, c), img.at(y1, x1, c), tx);
        out.at(y, x, c) = lerp(top, bottom, ty);
      }
    }
  }
  return out;
}

Image resize_short_side(const Image& img, std::size_t size) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  if (h <= w) return resize_bilinear(img, size, std::max<std::size_t>(1, size * w / h));
  return resize_bilinear(img, std::max<std::size_t>(1, size * h / w), size);
}

Image center_crop(const Image& img, std::size_t size) {
  if (size > img.height() || size > img.width()) throw AugmentError("crop larger than image");
  const auto top = static_cast<std::size_t>(std::lround((img.height() - size) / 2.0));
  const auto left = static_cast<std::size_t>(std::lround((img.width() - size) / 2.0));
  Image out(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
    }
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.height(), img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        out.at(y, x, c) = img.at(y, img.width() - 1 - x, c);
      }
    }
  }
  return out;
}

Image weak_augment(const Image& img, std::size_t out_size) {
  if (out_size < kMinAugmentSize) {
    throw AugmentError("output size must be at least " + std::to_string(kMinAugmentSize));
  }
  if (img.height() == out_size && img.width() == out_size) return img;
  return center_crop(resize_short_side(img, out_size), out_size);
}

Image random_crop_padded(const Image& img, std::size_t size, std::size_t padding, AugmentRng& rng) {
  const std::size_t ph = img.height() + 2 * padding;
  const std::size_t pw = img.width() + 2 * padding;
  if (size > ph || size > pw) throw AugmentError("crop larger than padded image");
  const std::size_t top = rng.index(ph - size + 1);
  const std::size_t left = rng.index(pw - size + 1);
  Image out(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = top + y;
    if (sy < padding || sy >= padding + img.height()) continue;
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = left + x;
      if (sx < padding || sx >= padding + img.width()) continue;
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        out.at(y, x, c) = img.at(sy - padding, sx - padding, c);
      }
    }
  }
  return out;
}

Image apply_randaugment_op(const Image& img, RandAugmentOp op, double level, bool negate) {
  const double sign = negate ? -1.0 : 1.0;
  Image out = img;
  switch (op) {
    case RandAugmentOp::identity:
      return out;
    case RandAugmentOp::brightness: {
      const auto factor = static_cast<float>(1.0 + sign * 0.9 * level);
      for (float& v : out.pixels()) v *= factor;
      break;
    }
    case RandAugmentOp::contrast: {
      const double factor = 1.0 + sign * 0.9 * level;
      double gray = 0.0;
      for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
          gray += 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
        }
      }
      gray /= static_cast<double>(img.height() * img.width());
      for (float& v : out.pixels()) v = static_cast<float>(gray + factor * (v - gray));
      break;
    }
    case RandAugmentOp::rotate: {
      const double theta = sign * 30.0 * level * std::numbers::pi / 180.0;
      const double cs = std::cos(theta);
      const double sn = std::sin(theta);
      out = affine_inverse(img, cs, sn, -sn, cs, 0.0, 0.0);
      break;
    }
    case RandAugmentOp::shear_x:
      out = affine_inverse(img, 1.0, -sign * 0.3 * level, 0.0, 1.0, 0.0, 0.0);
      break;
    case RandAugmentOp::shear_y:
      out = affine_inverse(img, 1.0, 0.0, -sign * 0.3 * level, 1.0, 0.0, 0.0);
      break;
    case RandAugmentOp::translate_x:
      out = affine_inverse(img, 1.0, 0.0, 0.0, 1.0,
                           -sign * 0.33 * level * static_cast<double>(img.width()), 0.0);
      break;
    case RandAugmentOp::translate_y:
      out = affine_inverse(img, 1.0, 0.0, 0.0, 1.0, 0.0,
                           -sign * 0.33 * level * static_cast<double>(img.height()));
      break;
  }
  out.clamp();
  return out;
}

Image rand_augment(const Image& img, AugmentRng& rng, int num_ops, int magnitude) {
  const double level = static_cast<double>(magnitude) / kRandAugmentMaxMagnitude;
  Image out = img;
  for (int i = 0; i < num_ops; ++i) {
    const auto op = static_cast<RandAugmentOp>(rng.index(kRandAugmentOpCount));
    const bool negate = rng.bernoulli(0.5);
    out = apply_randaugment_op(out, op, level, negate);
  }
  return out;
}

Image cutout_at(const Image& img, std::size_t patch, std::size_t cy, std::size_t cx) {
  Image out = img;
  const long half = static_cast<long>(patch / 2);
  const long y0 = std::max(0L, static_cast<long>(cy) - half);
  const long x0 = std::max(0L, static_cast<long>(cx) - half);
  const long y1 = std::min(static_cast<long>(img.height()), static_cast<long>(cy) - half + static_cast<long>(patch));
  const long x1 = std::min(static_cast<long>(img.width()), static_cast<long>(cx) - half + static_cast<long>(patch));
  for (long y = y0; y < y1; ++y) {
    for (long x = x0; x < x1; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = 0.0f;
      }
    }
  }
  return out;
}

Image cutout(const Image& img, std::size_t patch, AugmentRng& rng) {
  const std::size_t cy = rng.index(img.height());
  const std::size_t cx = rng.index(img.width());
  return cutout_at(img, patch, cy, cx);
}

Image strong_augment(const Image& img, std::size_t out_size, AugmentRng& rng) {
  if (out_size < kMinAugmentSize) {
    throw AugmentError("output size must be at least " + std::to_string(kMinAugmentSize));
  }
  Image out = resize_short_side(img, out_size);
  out = random_crop_padded(out, out_size, kCropPadding, rng);
  if (rng.bernoulli(0.5)) out = hflip(out);
  out = rand_augment(out, rng);
  out = cutout(out, out_size / 8, rng);
  out.clamp();
  return out;
}

std::string_view corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::shot_noise: return "shot_noise";
    case CorruptionKind::impulse_noise: return "impulse_noise";
    case CorruptionKind::gaussian_blur: return "gaussian_blur";
    case CorruptionKind::brightness: return "brightness";
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::pixelate: return "pixelate";
  }
  throw AugmentError("unknown corruption kind");
}

std::optional<CorruptionKind> corruption_from_name(std::string_view name) {
  for (CorruptionKind kind : kAllCorruptions) {
    if (corruption_name(kind) == name) return kind;
  }
  return std::nullopt;
}

bool is_noise_kind(CorruptionKind kind) noexcept {
  return kind == CorruptionKind::gaussian_noise || kind == CorruptionKind::shot_noise ||
         kind == CorruptionKind::impulse_noise;
}

double severity_parameter(CorruptionKind kind, int severity) {
  check_severity(severity);
  static constexpr std::array<std::array<double, 5>, 7> kTable{{
      {0.04, 0.06, 0.08, 0.09, 0.10},   // gaussian sigma
      {500, 250, 100, 75, 50},          // shot photon count
      {0.01, 0.02, 0.03, 0.05, 0.07},   // impulse fraction
      {0.5, 0.75, 1.0, 1.25, 1.5},      // blur radius
      {0.05, 0.10, 0.15, 0.20, 0.30},   // brightness shift
      {0.75, 0.6, 0.45, 0.3, 0.2},      // contrast factor
      {2, 3, 4, 5, 6},                  // pixelate block
  }};
  const auto row = static_cast<std::size_t>(kind);
  if (row >= kTable.size()) throw AugmentError("unknown corruption kind");
  return kTable[row][static_cast<std::size_t>(severity - 1)];
}

std::string CorruptionSpec::label() const {
  return std::string(corruption_name(kind)) + ":" + std::to_string(severity);
}

CorruptionSpec parse_corruption(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw AugmentError("corruption must be kind:severity, got '" + std::string(text) + "'");
  }
  const std::string_view name = text.substr(0, colon);
  const std::string_view sev = text.substr(colon + 1);
  const auto kind = corruption_from_name(name);
  if (!kind) throw AugmentError("unknown corruption kind '" + std::string(name) + "'");
  int severity = 0;
  const auto [ptr, ec] = std::from_chars(sev.data(), sev.data() + sev.size(), severity);
  if (ec != std::errc{} || ptr != sev.data() + sev.size()) {
    throw AugmentError("bad corruption severity '" + std::string(sev) + "'");
  }
  check_severity(severity);
  return {*kind, severity};
}

std::vector<CorruptionSpec> parse_corruption_list(std::string_view text) {
  std::vector<CorruptionSpec> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    if (!item.empty()) out.push_back(parse_corruption(item));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

Image corrupt(const Image& img, CorruptionKind kind, int severity, AugmentRng& rng) {
  const double param = severity_parameter(kind, severity);
  Image out = img;
  switch (kind) {
    case CorruptionKind::gaussian_noise:
      for (float& v : out.pixels()) v = static_cast<float>(v + param * rng.normal());
      break;
    case CorruptionKind::shot_noise:
      for (float& v : out.pixels()) {
        const double mean = std::max(0.0f, v) * param;
        v = static_cast<float>(static_cast<double>(rng.poisson(mean)) / param);
      }
      break;
    case CorruptionKind::impulse_noise:
      for (float& v : out.pixels()) {
        if (rng.bernoulli(param)) v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
      }
      break;
    case CorruptionKind::gaussian_blur:
      out = gaussian_blur(img, param);
      break;
    case CorruptionKind::brightness:
      for (float& v : out.pixels()) v = static_cast<float>(v + param);
      break;
    case CorruptionKind::contrast:
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        double mean = 0.0;
        for (std::size_t y = 0; y < img.height(); ++y) {
          for (std::size_t x = 0; x < img.width(); ++x) mean += img.at(y, x, c);
        }
        mean /= static_cast<double>(img.height() * img.width());
        for (std::size_t y = 0; y < img.height(); ++y) {
          for (std::size_t x = 0; x < img.width(); ++x) {
            out.at(y, x, c) = static_cast<float>(mean + param * (img.at(y, x, c) - mean));
          }
        }
      }
      break;
    case CorruptionKind::pixelate:
      out = pixelate(img, static_cast<std::size_t>(param));
      break;
  }
  out.clamp();
  return out;
}

}  // namespace lpclip::augment
