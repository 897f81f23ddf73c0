// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace lpclip {

/// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values) noexcept;

/// log(sum(exp(values * scale))) with max subtraction.
double log_sum_exp(std::span<const double> values, double scale = 1.0) noexcept;

/// out = softmax(values * scale), max-subtracted. `out` may alias `values`.
void softmax(std::span<const double> values, double scale, std::span<double> out) noexcept;

/// Shortest decimal text that round-trips the double.
std::string format_double(double value);

}  // namespace lpclip
