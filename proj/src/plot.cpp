// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/plot.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace lpclip::plot {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 56.0;
constexpr double kRight = 16.0;
constexpr double kTop = 32.0;
constexpr double kBottom = 44.0;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                               "#bcbd22", "#17becf"};

std::string fmt(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", v);
  std::string s(buf.data());
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

double px(double x01) { return kLeft + x01 * kPlotW; }
double py(double y01) { return kTop + (1.0 - y01) * kPlotH; }

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
      << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"20.00\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(title) << "</text>\n";
}

void axes(std::ostringstream& out, const std::string& xlabel, const std::string& ylabel,
          double xmin, double xmax, double ymin, double ymax) {
  out << "<g stroke=\"#000000\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << fmt(px(0)) << "\" y1=\"" << fmt(py(0)) << "\" x2=\"" << fmt(px(1))
      << "\" y2=\"" << fmt(py(0)) << "\"/>\n";
  out << "<line x1=\"" << fmt(px(0)) << "\" y1=\"" << fmt(py(0)) << "\" x2=\"" << fmt(px(0))
      << "\" y2=\"" << fmt(py(1)) << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double f = t / 4.0;
    out << "<text x=\"" << fmt(px(f)) << "\" y=\"" << fmt(py(0) + 14) << "\" text-anchor=\"middle\">"
        << fmt(xmin + f * (xmax - xmin)) << "</text>\n";
    out << "<text x=\"" << fmt(px(0) - 6) << "\" y=\"" << fmt(py(f) + 3) << "\" text-anchor=\"end\">"
        << fmt(ymin + f * (ymax - ymin)) << "</text>\n";
  }
  out << "<text x=\"" << fmt(px(0.5)) << "\" y=\"" << fmt(kHeight - 8) << "\" text-anchor=\"middle\">"
      << escape(xlabel) << "</text>\n";
  out << "<text x=\"14.00\" y=\"" << fmt(py(0.5)) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14.00 "
      << fmt(py(0.5)) << ")\">" << escape(ylabel) << "</text>\n";
  out << "</g>\n";
}

const metrics::CalibrationReport& need_calibration(const PlotReport& report) {
  if (!report.calibration || report.calibration->samples == 0 || report.calibration->bins.empty()) {
    throw PlotError("empty report");
  }
  return *report.calibration;
}

std::string reliability(const PlotReport& report) {
  const auto& cal = need_calibration(report);
  std::ostringstream out;
  open_svg(out, report.title.empty() ? "Reliability diagram" : report.title);
  const double bw = 1.0 / static_cast<double>(cal.bins.size());
  out << "<g fill=\"#4c72b0\" stroke=\"#1f3b6f\" stroke-width=\"0.5\">\n";
  for (std::size_t b = 0; b < cal.bins.size(); ++b) {
    const auto& bin = cal.bins[b];
    if (bin.count == 0) continue;
    const double x0 = static_cast<double>(b) * bw;
    out << "<rect x=\"" << fmt(px(x0)) << "\" y=\"" << fmt(py(bin.accuracy)) << "\" width=\""
        << fmt(bw * kPlotW) << "\" height=\"" << fmt(bin.accuracy * kPlotH) << "\" data-conf=\""
        << fmt(bin.mean_confidence) << "\" data-acc=\"" << fmt(bin.accuracy) << "\"/>\n";
  }
  out << "</g>\n";
  out << "<line x1=\"" << fmt(px(0)) << "\" y1=\"" << fmt(py(0)) << "\" x2=\"" << fmt(px(1))
      << "\" y2=\"" << fmt(py(1)) << "\" stroke=\"#d62728\" stroke-width=\"1.5\" "
      << "stroke-dasharray=\"4 3\"/>\n";
  axes(out, "confidence", "accuracy", 0, 1, 0, 1);
  out << "<text x=\"" << fmt(px(0.03)) << "\" y=\"" << fmt(py(0.95)) << "\" font-family=\"sans-serif\" "
      << "font-size=\"12\">ECE " << fmt(cal.ece * 100.0) << "%</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string histogram(const PlotReport& report) {
  const auto& cal = need_calibration(report);
  struct Series {
    const char* name;
    const char* colour;
    const std::vector<std::size_t>* counts;
  };
  const std::array<Series, 3> series{Series{"correct", "#2ca02c", &cal.hist_correct},
                                     Series{"incorrect", "#d62728", &cal.hist_incorrect},
                                     Series{"ood", "#1f77b4", &cal.hist_ood}};
  double peak = 0.0;
  for (const auto& s : series) {
    std::size_t total = 0;
    for (std::size_t c : *s.counts) total += c;
    if (total == 0) continue;
    for (std::size_t c : *s.counts) peak = std::max(peak, static_cast<double>(c) / total);
  }
  if (peak <= 0.0) throw PlotError("empty report");

  std::ostringstream out;
  open_svg(out, report.title.empty() ? "Confidence histogram" : report.title);
  const double bw = 1.0 / static_cast<double>(cal.bins.size());
  double legend_y = 0.95;
  for (const auto& s : series) {
    std::size_t total = 0;
    for (std::size_t c : *s.counts) total += c;
    if (total == 0) continue;
    out << "<g class=\"series\" data-name=\"" << s.name << "\" fill=\"" << s.colour
        << "\" fill-opacity=\"0.45\" stroke=\"" << s.colour << "\" stroke-width=\"0.5\">\n";
    for (std::size_t b = 0; b < s.counts->size(); ++b) {
      const double h = static_cast<double>((*s.counts)[b]) / total / peak;
      if (h <= 0.0) continue;
      out << "<rect x=\"" << fmt(px(b * bw)) << "\" y=\"" << fmt(py(h)) << "\" width=\""
          << fmt(bw * kPlotW) << "\" height=\"" << fmt(h * kPlotH) << "\"/>\n";
    }
    out << "</g>\n";
    out << "<text x=\"" << fmt(px(0.03)) << "\" y=\"" << fmt(py(legend_y)) << "\" fill=\"" << s.colour
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << " (" << total << ")</text>\n";
    legend_y -= 0.07;
  }
  axes(out, "confidence", "fraction of population", 0, 1, 0, peak);
  out << "</svg>\n";
  return out.str();
}

std::string scatter(const PlotReport& report) {
  if (!report.pca || report.pca->coordinates.rows() == 0 || report.pca->coordinates.cols() < 2) {
    throw PlotError("empty report");
  }
  const MatrixD& xy = report.pca->coordinates;
  if (!report.pca_labels.empty() && report.pca_labels.size() != xy.rows()) {
    throw PlotError("pca labels do not match the projection");
  }
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (std::size_t i = 0; i < xy.rows(); ++i) {
    xmin = std::min(xmin, xy(i, 0));
    xmax = std::max(xmax, xy(i, 0));
    ymin = std::min(ymin, xy(i, 1));
    ymax = std::max(ymax, xy(i, 1));
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;

  std::ostringstream out;
  open_svg(out, report.title.empty() ? "PCA of embeddings" : report.title);
  out << "<g stroke=\"none\" fill-opacity=\"0.7\">\n";
  for (std::size_t i = 0; i < xy.rows(); ++i) {
    const std::int64_t label = report.pca_labels.empty() ? 0 : report.pca_labels[i];
    const char* colour =
        label < 0 ? "#000000" : kPalette[static_cast<std::size_t>(label) % kPalette.size()];
    out << "<circle cx=\"" << fmt(px((xy(i, 0) - xmin) / (xmax - xmin))) << "\" cy=\""
        << fmt(py((xy(i, 1) - ymin) / (ymax - ymin))) << "\" r=\"2.00\" fill=\"" << colour
        << "\"/>\n";
  }
  out << "</g>\n";
  const auto& ratio = report.pca->explained_ratio;
  axes(out, "PC1 (" + fmt(100.0 * ratio.at(0)) + "%)", "PC2 (" + fmt(100.0 * ratio.at(1)) + "%)",
       xmin, xmax, ymin, ymax);
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::string_view plot_kind_name(PlotKind kind) {
  switch (kind) {
    case PlotKind::reliability: return "reliability";
    case PlotKind::histogram: return "histogram";
    case PlotKind::pca: return "pca";
  }
  return "unknown";
}

std::string render_svg(const PlotReport& report, PlotKind kind) {
  switch (kind) {
    case PlotKind::reliability: return reliability(report);
    case PlotKind::histogram: return histogram(report);
    case PlotKind::pca: return scatter(report);
  }
  throw PlotError("unknown plot kind");
}

void emit_plot(const PlotReport& report, PlotKind kind, const std::filesystem::path& path) {
  const std::string svg = render_svg(report, kind);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlotError("cannot open " + path.string());
  out << svg;
  if (!out) throw PlotError("write failed: " + path.string());
}

}  // namespace lpclip::plot
