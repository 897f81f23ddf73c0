// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Evaluation: accuracy, calibration (ECE, reliability bins, confidence
/// histograms), OOD detection (AUROC, AUPR, FPR at 95% TPR) and PCA.
///
/// OOD conventions: the score is the maximum softmax probability and the
/// in-distribution set is the positive class.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpclip/matrix.hpp"

namespace lpclip::metrics {

inline constexpr std::size_t kDefaultBins = 15;

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double accuracy(std::span<const std::size_t> predicted, std::span<const std::int64_t> labels);

/// Equal-width bin of a confidence in [0, 1]: the largest b with
/// confidence >= b / bins. 1.0 lands in the last bin.
std::size_t confidence_bin(double confidence, std::size_t bins);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  std::vector<std::size_t> hist_correct;
  std::vector<std::size_t> hist_incorrect;
  std::vector<std::size_t> hist_ood;
  std::size_t samples = 0;
};

CalibrationReport calibration_report(std::span<const double> confidence,
                                     const std::vector<bool>& correct,
                                     std::span<const double> ood_confidence = {},
                                     std::size_t num_bins = kDefaultBins);

nlohmann::json to_json(const CalibrationReport& report);
/// `bin_lower,bin_upper,mean_conf,accuracy,count`
void write_calibration_csv(const CalibrationReport& report, const std::filesystem::path& path);
/// `bin_lower,bin_upper,correct,incorrect,ood`
void write_histogram_csv(const CalibrationReport& report, const std::filesystem::path& path);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

/// P(id > ood) + 0.5 P(id == ood).
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);
/// Step-wise area: sum over descending thresholds of (recall gain) * precision.
double aupr(std::span<const double> id_scores, std::span<const double> ood_scores);
/// FPR at the largest threshold t with #(id >= t) >= 95% of id (no interpolation).
double fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores);

/// (FPR, TPR) from (0,0) to (1,1), one point per distinct threshold.
std::vector<CurvePoint> roc_curve(std::span<const double> id_scores,
                                  std::span<const double> ood_scores);
/// (recall, precision), one point per distinct threshold.
std::vector<CurvePoint> pr_curve(std::span<const double> id_scores,
                                 std::span<const double> ood_scores);

struct OodReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  std::vector<CurvePoint> roc_points;
  std::vector<CurvePoint> pr_points;
};

OodReport ood_report(std::span<const double> id_scores, std::span<const double> ood_scores);
nlohmann::json to_json(const OodReport& report);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  MatrixD vectors;             // column j pairs with values[j]
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
SymmetricEigen symmetric_eigen(const MatrixD& matrix);

struct PcaProjection {
  MatrixD coordinates;  // N x k
  MatrixD components;   // k x D, first nonzero entry of each row positive
  std::vector<double> explained_ratio;
};

PcaProjection pca_project(const MatrixD& data, std::size_t k);

}  // namespace lpclip::metrics
