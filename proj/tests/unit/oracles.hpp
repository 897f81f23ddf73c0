// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations of the evaluation metrics.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

namespace lpclip::testing {

inline std::size_t oracle_bin(double conf, std::size_t bins) {
  for (std::size_t b = bins; b-- > 0;) {
    if (conf >= static_cast<double>(b) / static_cast<double>(bins)) return b;
  }
  return 0;
}

inline double oracle_ece(const std::vector<double>& conf, const std::vector<bool>& correct, std::size_t bins) {
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    double sum_conf = 0.0, hits = 0.0, count = 0.0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
      if (oracle_bin(conf[i], bins) != b) continue;
      sum_conf += conf[i];
      hits += correct[i] ? 1.0 : 0.0;
      count += 1.0;
    }
    if (count > 0) ece += count / static_cast<double>(conf.size()) * std::abs(hits / count - sum_conf / count);
  }
  return ece;
}

inline double oracle_auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double a : id) {
    for (double b : ood) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(id.size() * ood.size());
}

inline double oracle_aupr(const std::vector<double>& id, const std::vector<double>& ood) {
  std::set<double, std::greater<>> thresholds(id.begin(), id.end());
  thresholds.insert(ood.begin(), ood.end());
  double area = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (double s : id) tp += s >= t ? 1.0 : 0.0;
    for (double s : ood) fp += s >= t ? 1.0 : 0.0;
    const double recall = tp / static_cast<double>(id.size());
    if (tp + fp > 0) area += (recall - prev_recall) * tp / (tp + fp);
    prev_recall = recall;
  }
  return area;
}

inline double oracle_fpr95(const std::vector<double>& id, const std::vector<double>& ood) {
  double best = -1.0;
  for (double t : id) {
    double tp = 0.0;
    for (double s : id) tp += s >= t ? 1.0 : 0.0;
    if (tp / static_cast<double>(id.size()) >= 0.95) best = std::max(best, t);
  }
  double fp = 0.0;
  for (double s : ood) fp += s >= best ? 1.0 : 0.0;
  return fp / static_cast<double>(ood.size());
}

}  // namespace lpclip::testing
