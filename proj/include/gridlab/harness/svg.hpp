#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "gridlab/error.hpp"

namespace gridlab {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct ChartLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

namespace detail {

inline std::string fixed2(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, end);
}

inline std::string tick_label(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
  return std::string(buf, end);
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// SVG 1.1 line chart: one polyline per series, axes with 5 ticks each and a
/// legend. Numbers are printed with fixed precision so output is byte-stable.
inline std::string render_svg_string(const std::vector<Series>& series, const ChartLabels& labels = {}) {
  if (series.empty()) throw EmptyDataError("no series to plot");
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : series) {
    if (s.points.empty()) throw EmptyDataError("series '" + s.name + "' has no points");
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (!(x_hi >= x_lo)) throw EmptyDataError("no finite points to plot");
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;

  constexpr double width = 640, height = 420, left = 70, right = 160, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return top + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h; };
  static constexpr std::array<const char*, 8> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  using detail::fixed2;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
  out += "<text x=\"" + fixed2(left + plot_w / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         detail::xml_escape(labels.title) + "</text>\n";
  out += "<line x1=\"" + fixed2(left) + "\" y1=\"" + fixed2(top + plot_h) + "\" x2=\"" + fixed2(left + plot_w) + "\" y2=\"" +
         fixed2(top + plot_h) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + fixed2(left) + "\" y1=\"" + fixed2(top) + "\" x2=\"" + fixed2(left) + "\" y2=\"" +
         fixed2(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / 4.0;
    const double fy = y_lo + (y_hi - y_lo) * i / 4.0;
    out += "<text x=\"" + fixed2(px(fx)) + "\" y=\"" + fixed2(top + plot_h + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + detail::tick_label(fx) + "</text>\n";
    out += "<text x=\"" + fixed2(left - 6) + "\" y=\"" + fixed2(py(fy) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + detail::tick_label(fy) + "</text>\n";
  }
  out += "<text x=\"" + fixed2(left + plot_w / 2) + "\" y=\"" + fixed2(height - 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + detail::xml_escape(labels.x_label) + "</text>\n";
  out += "<text x=\"18\" y=\"" + fixed2(top + plot_h / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 " +
         fixed2(top + plot_h / 2) + ")\">" + detail::xml_escape(labels.y_label) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % colors.size()];
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (const auto& [x, y] : series[i].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!first) out += ' ';
      out += fixed2(px(x)) + "," + fixed2(py(y));
      first = false;
    }
    out += "\"/>\n";
    const double ly = top + 14.0 + 18.0 * static_cast<double>(i);
    out += "<line x1=\"" + fixed2(left + plot_w + 12) + "\" y1=\"" + fixed2(ly) + "\" x2=\"" + fixed2(left + plot_w + 32) +
           "\" y2=\"" + fixed2(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fixed2(left + plot_w + 36) + "\" y=\"" + fixed2(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::xml_escape(series[i].name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void render_svg(const std::vector<Series>& series, const std::string& path, const ChartLabels& labels = {}) {
  const std::string text = render_svg_string(series, labels);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace gridlab
