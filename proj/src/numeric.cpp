// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/numeric.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>

namespace lpclip {

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double log_sum_exp(std::span<const double> values, double scale) noexcept {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) peak = std::max(peak, v * scale);
  double sum = 0.0;
  for (double v : values) sum += std::exp(v * scale - peak);
  return peak + std::log(sum);
}

void softmax(std::span<const double> values, double scale, std::span<double> out) noexcept {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) peak = std::max(peak, v * scale);
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] * scale - peak);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

}  // namespace lpclip
