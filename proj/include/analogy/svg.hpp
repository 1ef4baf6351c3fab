// Copyright 2026 The Analogy Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal SVG rendering: heatmaps, bar charts, line charts with bands and
// labelled scatter plots.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace analogy::svg {

inline std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline const std::vector<std::string>& Palette() {
  static const std::vector<std::string> p = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return p;
}

// White (0) to dark blue (1).
inline std::string Blue(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(255 - t * (255 - 8));
  const int g = static_cast<int>(255 - t * (255 - 48));
  const int b = static_cast<int>(255 - t * (255 - 107));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

class Canvas {
 public:
  Canvas(double w, double h) : w_(w), h_(h) {}

  void Rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none") {
    os_ << "<rect x=\"" << Num(x) << "\" y=\"" << Num(y) << "\" width=\"" << Num(w)
        << "\" height=\"" << Num(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
        << "\"/>\n";
  }
  void Line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1) {
    os_ << "<line x1=\"" << Num(x1) << "\" y1=\"" << Num(y1) << "\" x2=\"" << Num(x2)
        << "\" y2=\"" << Num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width
        << "\"/>\n";
  }
  void Circle(double x, double y, double r, const std::string& fill, double opacity = 1) {
    os_ << "<circle cx=\"" << Num(x) << "\" cy=\"" << Num(y) << "\" r=\"" << Num(r)
        << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\"/>\n";
  }
  void Polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) os_ << Num(x) << ',' << Num(y) << ' ';
    os_ << "\"/>\n";
  }
  void Polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
               double opacity) {
    os_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\" points=\"";
    for (const auto& [x, y] : pts) os_ << Num(x) << ',' << Num(y) << ' ';
    os_ << "\"/>\n";
  }
  void Text(double x, double y, const std::string& s, double size = 10,
            const std::string& anchor = "middle", double rotate = 0) {
    os_ << "<text x=\"" << Num(x) << "\" y=\"" << Num(y) << "\" font-size=\"" << size
        << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\"";
    if (rotate != 0) os_ << " transform=\"rotate(" << rotate << ' ' << Num(x) << ' ' << Num(y) << ")\"";
    os_ << '>' << Escape(s) << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(w_) << "\" height=\""
        << Num(h_) << "\" viewBox=\"0 0 " << Num(w_) << ' ' << Num(h_) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << os_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double w_, h_;
  std::ostringstream os_;
};

// Row-major values scaled to [0, vmax] (vmax <= 0 uses the data maximum).
inline std::string Heatmap(const std::vector<std::vector<double>>& values,
                           const std::vector<std::string>& row_labels,
                           const std::vector<std::string>& col_labels, const std::string& title,
                           double vmax = 0) {
  const int rows = static_cast<int>(values.size());
  const int cols = rows ? static_cast<int>(values[0].size()) : 0;
  double mx = vmax;
  if (mx <= 0) {
    for (const auto& r : values) {
      for (double v : r) mx = std::max(mx, v);
    }
    if (mx <= 0) mx = 1;
  }
  const double cell = std::clamp(600.0 / std::max(1, std::max(rows, cols)), 4.0, 24.0);
  const double left = 40, top = 40;
  Canvas c(left + cols * cell + 20, top + rows * cell + 20);
  c.Text(left + cols * cell / 2, 16, title, 12);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      c.Rect(left + j * cell, top + i * cell, cell, cell, Blue(values[i][j] / mx));
    }
    if (i < static_cast<int>(row_labels.size())) {
      c.Text(left - 4, top + (i + 0.7) * cell, row_labels[i], std::min(cell * 0.8, 10.0), "end");
    }
  }
  for (int j = 0; j < cols && j < static_cast<int>(col_labels.size()); ++j) {
    c.Text(left + (j + 0.5) * cell, top - 4, col_labels[j], std::min(cell * 0.8, 10.0));
  }
  return c.str();
}

struct Bar {
  std::string label;
  double value = 0;
  std::optional<double> lo, hi;
};

inline std::string BarChart(const std::vector<Bar>& bars, const std::string& title,
                            const std::string& y_label, double y_max = 1.0) {
  const double left = 60, top = 40, plot_h = 260, bar_w = 28, gap = 10;
  const double plot_w = std::max(1.0, bars.size() * (bar_w + gap));
  Canvas c(left + plot_w + 20, top + plot_h + 120);
  c.Text(left + plot_w / 2, 20, title, 12);
  c.Line(left, top, left, top + plot_h, "black");
  c.Line(left, top + plot_h, left + plot_w, top + plot_h, "black");
  c.Text(16, top + plot_h / 2, y_label, 10, "middle", -90);
  for (int t = 0; t <= 4; ++t) {
    const double v = y_max * t / 4;
    const double y = top + plot_h - plot_h * t / 4;
    c.Line(left - 3, y, left, y, "black");
    c.Text(left - 5, y + 3, Num(v), 9, "end");
  }
  auto ypos = [&](double v) { return top + plot_h - plot_h * std::clamp(v / y_max, 0.0, 1.0); };
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x = left + gap / 2 + i * (bar_w + gap);
    const double y = ypos(bars[i].value);
    c.Rect(x, y, bar_w, top + plot_h - y, Palette()[0]);
    if (bars[i].lo && bars[i].hi) {
      c.Line(x + bar_w / 2, ypos(*bars[i].lo), x + bar_w / 2, ypos(*bars[i].hi), "black");
    }
    c.Text(x + bar_w / 2, top + plot_h + 10, bars[i].label, 9, "end", -60);
  }
  return c.str();
}

struct Series {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // optional band, same length as x
};

inline std::string LineChart(const std::vector<Series>& series, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             double y_max = 1.0) {
  const double left = 60, top = 40, plot_w = 420, plot_h = 260;
  double x_min = 1e300, x_max = -1e300;
  for (const Series& s : series) {
    for (double v : s.x) {
      x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
  }
  if (x_min > x_max) x_min = 0, x_max = 1;
  if (x_min == x_max) x_max = x_min + 1;
  auto px = [&](double v) { return left + plot_w * (v - x_min) / (x_max - x_min); };
  auto py = [&](double v) { return top + plot_h - plot_h * std::clamp(v / y_max, 0.0, 1.0); };
  Canvas c(left + plot_w + 160, top + plot_h + 60);
  c.Text(left + plot_w / 2, 20, title, 12);
  c.Line(left, top, left, top + plot_h, "black");
  c.Line(left, top + plot_h, left + plot_w, top + plot_h, "black");
  c.Text(left + plot_w / 2, top + plot_h + 36, x_label, 10);
  c.Text(16, top + plot_h / 2, y_label, 10, "middle", -90);
  for (int t = 0; t <= 4; ++t) {
    c.Text(left - 5, py(y_max * t / 4) + 3, Num(y_max * t / 4), 9, "end");
    const double xv = x_min + (x_max - x_min) * t / 4;
    c.Text(px(xv), top + plot_h + 14, Num(xv), 9);
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const std::string& col = Palette()[k % Palette().size()];
    if (s.lo.size() == s.x.size() && s.hi.size() == s.x.size() && !s.x.empty()) {
      std::vector<std::pair<double, double>> band;
      for (std::size_t i = 0; i < s.x.size(); ++i) band.emplace_back(px(s.x[i]), py(s.hi[i]));
      for (std::size_t i = s.x.size(); i-- > 0;) band.emplace_back(px(s.x[i]), py(s.lo[i]));
      c.Polygon(band, col, 0.2);
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      pts.emplace_back(px(s.x[i]), py(s.y[i]));
      c.Circle(px(s.x[i]), py(s.y[i]), 2.5, col);
    }
    c.Polyline(pts, col);
    c.Rect(left + plot_w + 16, top + 14 * k, 10, 10, col);
    c.Text(left + plot_w + 30, top + 14 * k + 9, s.name, 10, "start");
  }
  return c.str();
}

struct Point {
  double x = 0, y = 0;
  int group = 0;
};

inline std::string Scatter(const std::vector<Point>& pts, const std::vector<std::string>& groups,
                           const std::string& title) {
  const double left = 40, top = 40, size = 360;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const Point& p : pts) {
    x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
  }
  if (x0 >= x1) x0 -= 1, x1 += 1;
  if (y0 >= y1) y0 -= 1, y1 += 1;
  Canvas c(left + size + 140, top + size + 30);
  c.Text(left + size / 2, 20, title, 12);
  c.Rect(left, top, size, size, "none", "black");
  for (const Point& p : pts) {
    c.Circle(left + size * (p.x - x0) / (x1 - x0), top + size - size * (p.y - y0) / (y1 - y0),
             1.8, Palette()[p.group % Palette().size()], 0.35);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    c.Rect(left + size + 12, top + 14 * g, 10, 10, Palette()[g % Palette().size()]);
    c.Text(left + size + 26, top + 14 * g + 9, groups[g], 10, "start");
  }
  return c.str();
}

}  // namespace analogy::svg
