#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crowdeval::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {
      "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
      "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  return colors;
}

struct RadarSeries {
  std::string name;
  // axis index -> value in [0,100]; absent axes leave a gap in the polygon
  std::map<int, double> values;
};

/// Radar chart: one axis per label, one polygon per series. Values are
/// clamped to [0,100]. A footnote lists context the caller wants shown
/// (e.g. omitted rounds).
inline std::string radar_chart(const std::vector<std::string>& axis_labels,
                               const std::vector<RadarSeries>& series,
                               const std::string& title,
                               const std::string& footnote = "",
                               const std::string& generator_comment = "") {
  const double width = 640, height = 560;
  const double cx = 280, cy = 270, radius = 190;
  const int m = static_cast<int>(axis_labels.size());

  auto point = [&](int axis, double value) {
    double angle = -M_PI / 2 + 2 * M_PI * axis / (m > 0 ? m : 1);
    double r = radius * std::min(std::max(value, 0.0), 100.0) / 100.0;
    return std::pair<double, double>(cx + r * std::cos(angle),
                                     cy + r * std::sin(angle));
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
         "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " +
         num(height) + "\">\n";
  if (!generator_comment.empty())
    out += "<!-- " + generator_comment + " -->\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(cx) + "\" y=\"28\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" + escape(title) +
         "</text>\n";

  // rings and spokes
  for (int ring = 1; ring <= 4; ++ring) {
    std::string pts;
    for (int axis = 0; axis < m; ++axis) {
      auto [x, y] = point(axis, 25.0 * ring);
      pts += num(x) + "," + num(y) + " ";
    }
    if (m >= 3)
      out += "<polygon points=\"" + pts +
             "\" fill=\"none\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
  }
  for (int axis = 0; axis < m; ++axis) {
    auto [x, y] = point(axis, 100.0);
    out += "<line x1=\"" + num(cx) + "\" y1=\"" + num(cy) + "\" x2=\"" + num(x) +
           "\" y2=\"" + num(y) + "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    auto [lx, ly] = point(axis, 114.0);
    out += "<text x=\"" + num(lx) + "\" y=\"" + num(ly) +
           "\" text-anchor=\"middle\" dominant-baseline=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"12\">" +
           escape(axis_labels[static_cast<std::size_t>(axis)]) + "</text>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string& color = palette()[s % palette().size()];
    std::string pts;
    int present = 0;
    for (int axis = 0; axis < m; ++axis) {
      auto it = series[s].values.find(axis);
      if (it == series[s].values.end()) continue;  // gap: skip this vertex
      auto [x, y] = point(axis, it->second);
      pts += num(x) + "," + num(y) + " ";
      ++present;
    }
    if (present >= 2) {
      out += "<polygon points=\"" + pts + "\" fill=\"" + color +
             "\" fill-opacity=\"0.10\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
    }
    for (int axis = 0; axis < m; ++axis) {
      auto it = series[s].values.find(axis);
      if (it == series[s].values.end()) continue;
      auto [x, y] = point(axis, it->second);
      out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) +
             "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    }
    // legend
    double ly = 70 + 18 * static_cast<double>(s);
    out += "<rect x=\"510\" y=\"" + num(ly - 9) +
           "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
    out += "<text x=\"528\" y=\"" + num(ly + 1) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" +
           escape(series[s].name) + "</text>\n";
  }

  if (!footnote.empty())
    out += "<text x=\"20\" y=\"" + num(height - 16) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#555555\">" +
           escape(footnote) + "</text>\n";
  out += "</svg>\n";
  return out;
}

struct ScatterPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

/// Labeled scatter over [0,100] x [0,100].
inline std::string scatter_chart(const std::vector<ScatterPoint>& points,
                                 const std::string& title,
                                 const std::string& x_label,
                                 const std::string& y_label,
                                 const std::string& generator_comment = "") {
  const double width = 640, height = 520;
  const double left = 70, right = 600, top = 60, bottom = 450;
  auto px = [&](double v) { return left + (right - left) * v / 100.0; };
  auto py = [&](double v) { return bottom - (bottom - top) * v / 100.0; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
         "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " +
         num(height) + "\">\n";
  if (!generator_comment.empty())
    out += "<!-- " + generator_comment + " -->\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num((left + right) / 2) +
         "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + escape(title) + "</text>\n";

  for (int tick = 0; tick <= 100; tick += 20) {
    out += "<line x1=\"" + num(px(tick)) + "\" y1=\"" + num(top) + "\" x2=\"" +
           num(px(tick)) + "\" y2=\"" + num(bottom) +
           "\" stroke=\"#eeeeee\" stroke-width=\"1\"/>\n";
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(tick)) + "\" x2=\"" +
           num(right) + "\" y2=\"" + num(py(tick)) +
           "\" stroke=\"#eeeeee\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + num(px(tick)) + "\" y=\"" + num(bottom + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" + std::to_string(tick) + "</text>\n";
    out += "<text x=\"" + num(left - 10) + "\" y=\"" + num(py(tick) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" + std::to_string(tick) + "</text>\n";
  }
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" +
         num(right - left) + "\" height=\"" + num(bottom - top) +
         "\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n";
  out += "<text x=\"" + num((left + right) / 2) + "\" y=\"" + num(bottom + 42) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" + escape(x_label) + "</text>\n";
  out += "<text x=\"22\" y=\"" + num((top + bottom) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 22 " + num((top + bottom) / 2) + ")\">" +
         escape(y_label) + "</text>\n";

  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string& color = palette()[i % palette().size()];
    double x = px(points[i].x), y = py(points[i].y);
    out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) +
           "\" r=\"5\" fill=\"" + color + "\" fill-opacity=\"0.85\"/>\n";
    out += "<text x=\"" + num(x + 8) + "\" y=\"" + num(y - 6) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" +
           escape(points[i].label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace crowdeval::svg
