// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lpclip/numeric.hpp"

namespace lpclip::metrics {

using nlohmann::json;

namespace {

void require_nonempty(std::span<const double> id, std::span<const double> ood) {
  if (id.empty() || ood.empty()) throw MetricError("OOD metrics need non-empty score sets");
}

std::vector<double> sorted_desc(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::stable_sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// Cumulative (#id >= t, #ood >= t) at each distinct threshold, descending.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<std::size_t> id_at_or_above;
  std::vector<std::size_t> ood_at_or_above;
};

Sweep sweep(std::span<const double> id, std::span<const double> ood) {
  const std::vector<double> a = sorted_desc(id);
  const std::vector<double> b = sorted_desc(ood);
  Sweep s;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    double t;
    if (j == b.size() || (i < a.size() && a[i] >= b[j])) {
      t = a[i];
    } else {
      t = b[j];
    }
    while (i < a.size() && a[i] >= t) ++i;
    while (j < b.size() && b[j] >= t) ++j;
    s.thresholds.push_back(t);
    s.id_at_or_above.push_back(i);
    s.ood_at_or_above.push_back(j);
  }
  return s;
}

}  // namespace

double accuracy(std::span<const std::size_t> predicted, std::span<const std::int64_t> labels) {
  if (predicted.size() != labels.size()) throw MetricError("prediction / label length mismatch");
  if (predicted.empty()) throw MetricError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    hits += labels[i] >= 0 && predicted[i] == static_cast<std::size_t>(labels[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::size_t confidence_bin(double confidence, std::size_t bins) {
  const double n = static_cast<double>(bins);
  auto b = static_cast<std::size_t>(std::min(std::floor(confidence * n), n - 1.0));
  // Realign with the b / bins edges where the product rounded across one.
  while (b > 0 && confidence < static_cast<double>(b) / n) --b;
  while (b + 1 < bins && confidence >= static_cast<double>(b + 1) / n) ++b;
  return b;
}

CalibrationReport calibration_report(std::span<const double> confidence,
                                     const std::vector<bool>& correct,
                                     std::span<const double> ood_confidence, std::size_t num_bins) {
  if (num_bins == 0) throw MetricError("need at least one bin");
  if (confidence.size() != correct.size()) throw MetricError("confidence / correct length mismatch");
  auto check = [](double c) {
    if (!(c >= 0.0 && c <= 1.0)) throw MetricError("confidence out of range [0, 1]");
  };
  for (double c : confidence) check(c);
  for (double c : ood_confidence) check(c);

  CalibrationReport report;
  report.samples = confidence.size();
  report.bins.resize(num_bins);
  report.hist_correct.assign(num_bins, 0);
  report.hist_incorrect.assign(num_bins, 0);
  report.hist_ood.assign(num_bins, 0);
  std::vector<double> conf_sum(num_bins, 0.0);
  std::vector<std::size_t> hits(num_bins, 0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const std::size_t b = confidence_bin(confidence[i], num_bins);
    conf_sum[b] += confidence[i];
    ++report.bins[b].count;
    if (correct[i]) {
      ++hits[b];
      ++report.hist_correct[b];
    } else {
      ++report.hist_incorrect[b];
    }
  }
  for (double c : ood_confidence) ++report.hist_ood[confidence_bin(c, num_bins)];

  const double n = static_cast<double>(num_bins);
  for (std::size_t b = 0; b < num_bins; ++b) {
    CalibrationBin& bin = report.bins[b];
    bin.lower = static_cast<double>(b) / n;
    bin.upper = static_cast<double>(b + 1) / n;
    if (bin.count == 0) continue;
    const double count = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / count;
    bin.accuracy = static_cast<double>(hits[b]) / count;
    report.ece += count / static_cast<double>(report.samples) *
                  std::fabs(bin.accuracy - bin.mean_confidence);
  }
  return report;
}

json to_json(const CalibrationReport& report) {
  json bins = json::array();
  for (const CalibrationBin& b : report.bins) {
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"mean_confidence", b.mean_confidence},
                    {"accuracy", b.accuracy},
                    {"count", b.count}});
  }
  return {{"ece", report.ece},
          {"samples", report.samples},
          {"bins", bins},
          {"histograms",
           {{"correct", report.hist_correct},
            {"incorrect", report.hist_incorrect},
            {"ood", report.hist_ood}}}};
}

void write_calibration_csv(const CalibrationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MetricError("cannot open " + path.string());
  out << "bin_lower,bin_upper,mean_conf,accuracy,count\n";
  for (const CalibrationBin& b : report.bins) {
    out << format_double(b.lower) << ',' << format_double(b.upper) << ','
        << format_double(b.mean_confidence) << ',' << format_double(b.accuracy) << ',' << b.count
        << '\n';
  }
}

void write_histogram_csv(const CalibrationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MetricError("cannot open " + path.string());
  out << "bin_lower,bin_upper,correct,incorrect,ood\n";
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    out << format_double(report.bins[b].lower) << ',' << format_double(report.bins[b].upper) << ','
        << report.hist_correct[b] << ',' << report.hist_incorrect[b] << ',' << report.hist_ood[b]
        << '\n';
  }
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  // Twice the Mann-Whitney U statistic, kept integral until the end.
  std::uint64_t twice_wins = 0;
  for (double s : id_scores) {
    const auto below = std::lower_bound(ood.begin(), ood.end(), s) - ood.begin();
    const auto at_or_below = std::upper_bound(ood.begin(), ood.end(), s) - ood.begin();
    twice_wins += 2 * static_cast<std::uint64_t>(below) +
                  static_cast<std::uint64_t>(at_or_below - below);
  }
  return static_cast<double>(twice_wins) /
         (2.0 * static_cast<double>(id_scores.size()) * static_cast<double>(ood.size()));
}

std::vector<CurvePoint> roc_curve(std::span<const double> id_scores,
                                  std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  const Sweep s = sweep(id_scores, ood_scores);
  const double np = static_cast<double>(id_scores.size());
  const double nn = static_cast<double>(ood_scores.size());
  std::vector<CurvePoint> points{{0.0, 0.0}};
  for (std::size_t k = 0; k < s.thresholds.size(); ++k) {
    points.push_back({static_cast<double>(s.ood_at_or_above[k]) / nn,
                      static_cast<double>(s.id_at_or_above[k]) / np});
  }
  return points;
}

std::vector<CurvePoint> pr_curve(std::span<const double> id_scores,
                                 std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  const Sweep s = sweep(id_scores, ood_scores);
  const double np = static_cast<double>(id_scores.size());
  std::vector<CurvePoint> points;
  for (std::size_t k = 0; k < s.thresholds.size(); ++k) {
    const auto tp = static_cast<double>(s.id_at_or_above[k]);
    const auto fp = static_cast<double>(s.ood_at_or_above[k]);
    points.push_back({tp / np, tp / (tp + fp)});
  }
  return points;
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  const std::vector<CurvePoint> points = pr_curve(id_scores, ood_scores);
  double area = 0.0;
  double prev_recall = 0.0;
  for (const CurvePoint& p : points) {
    area += (p.x - prev_recall) * p.y;
    prev_recall = p.x;
  }
  return area;
}

double fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  const std::vector<double> id = sorted_desc(id_scores);
  // Smallest k with k / n >= 95 / 100, in exact integer arithmetic.
  const std::size_t needed = (95 * id.size() + 99) / 100;
  const double threshold = id[needed - 1];
  std::size_t accepted = 0;
  for (double s : ood_scores) accepted += s >= threshold ? 1 : 0;
  return static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
}

OodReport ood_report(std::span<const double> id_scores, std::span<const double> ood_scores) {
  OodReport report;
  report.auroc = auroc(id_scores, ood_scores);
  report.aupr = aupr(id_scores, ood_scores);
  report.fpr95 = fpr_at_95_tpr(id_scores, ood_scores);
  report.roc_points = roc_curve(id_scores, ood_scores);
  report.pr_points = pr_curve(id_scores, ood_scores);
  return report;
}

json to_json(const OodReport& report) {
  auto points = [](const std::vector<CurvePoint>& pts) {
    json arr = json::array();
    for (const CurvePoint& p : pts) arr.push_back({p.x, p.y});
    return arr;
  };
  return {{"auroc", report.auroc},
          {"aupr", report.aupr},
          {"fpr95", report.fpr95},
          {"roc_points", points(report.roc_points)},
          {"pr_points", points(report.pr_points)}};
}

SymmetricEigen symmetric_eigen(const MatrixD& matrix) {
  const std::size_t n = matrix.rows();
  if (matrix.cols() != n) throw MetricError("eigen-decomposition needs a square matrix");
  MatrixD a = matrix;
  MatrixD v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  auto off_diagonal = [&] {
    double sq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) sq += a(p, q) * a(p, q);
    }
    return std::sqrt(sq);
  };
  double scale = 0.0;
  for (double x : a.values()) scale = std::max(scale, std::fabs(x));

  for (int sweep_index = 0; sweep_index < 100; ++sweep_index) {
    if (off_diagonal() <= 1e-15 * std::max(scale, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{std::vector<double>(n), MatrixD(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
  }
  return out;
}

PcaProjection pca_project(const MatrixD& data, std::size_t k) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (k < 1 || k > d) throw MetricError("PCA needs 1 <= k <= D");
  if (n <= k) throw MetricError("PCA needs more samples than components");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += data(i, j);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  MatrixD centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = data(i, j) - mean[j];
  }
  MatrixD cov(d, d, 0.0);
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t q = p; q < d; ++q) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += centered(i, p) * centered(i, q);
      cov(p, q) = cov(q, p) = acc / static_cast<double>(n - 1);
    }
  }
  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += cov(j, j);
  if (!(trace > 0.0)) throw MetricError("zero variance");

  const SymmetricEigen eig = symmetric_eigen(cov);
  PcaProjection out{MatrixD(n, k), MatrixD(k, d), std::vector<double>(k)};
  const double tiny = 1e-12;
  for (std::size_t c = 0; c < k; ++c) {
    double sign = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (std::fabs(eig.vectors(j, c)) > tiny) {
        sign = eig.vectors(j, c) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t j = 0; j < d; ++j) out.components(c, j) = sign * eig.vectors(j, c);
    out.explained_ratio[c] = std::max(0.0, eig.values[c]) / trace;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += centered(i, j) * out.components(c, j);
      out.coordinates(i, c) = acc;
    }
  }
  return out;
}

}  // namespace lpclip::metrics
