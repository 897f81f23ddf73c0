// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Deterministic SVG figures: reliability diagram, confidence histogram and
/// PCA scatter. Coordinates are printed with two decimals so output is
/// byte-stable.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lpclip/metrics.hpp"

namespace lpclip::plot {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PlotKind { reliability, histogram, pca };

std::string_view plot_kind_name(PlotKind kind);

struct PlotReport {
  std::string title;
  std::optional<metrics::CalibrationReport> calibration;
  std::optional<metrics::PcaProjection> pca;
  /// One per PCA row; -1 draws the point as out-of-distribution.
  std::vector<std::int64_t> pca_labels;
};

std::string render_svg(const PlotReport& report, PlotKind kind);

void emit_plot(const PlotReport& report, PlotKind kind, const std::filesystem::path& path);

}  // namespace lpclip::plot
