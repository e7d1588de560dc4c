#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "drcast/csv.hpp"

namespace drcast {

// Minimal static SVG rendering for the report plots: grouped box plots
// (boxes 25th-75th percentile, whiskers 10th-90th, red median, green mean)
// and histograms. Coordinates go through format_double, so output bytes are
// reproducible.

struct BoxSpec {
  std::string label;
  double p10 = 0.0, p25 = 0.0, median = 0.0, p75 = 0.0, p90 = 0.0, mean = 0.0;
  std::string fill = "#6699cc";
};

namespace svg_detail {

struct Canvas {
  std::ostringstream out;
  double width, height;

  Canvas(double w, double h) : width(w), height(h) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(w)
        << "\" height=\"" << format_double(h) << "\" viewBox=\"0 0 " << format_double(w) << " "
        << format_double(h) << "\">\n";
    out << "<rect width=\"" << format_double(w) << "\" height=\"" << format_double(h)
        << "\" fill=\"white\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width_px = 1.0) {
    out << "<line x1=\"" << format_double(x1) << "\" y1=\"" << format_double(y1) << "\" x2=\""
        << format_double(x2) << "\" y2=\"" << format_double(y2) << "\" stroke=\"" << stroke
        << "\" stroke-width=\"" << format_double(width_px) << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke) {
    out << "<rect x=\"" << format_double(x) << "\" y=\"" << format_double(y) << "\" width=\""
        << format_double(w) << "\" height=\"" << format_double(h) << "\" fill=\"" << fill
        << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& anchor = "middle") {
    out << "<text x=\"" << format_double(x) << "\" y=\"" << format_double(y)
        << "\" font-family=\"sans-serif\" font-size=\"" << size << "\" text-anchor=\"" << anchor
        << "\">" << s << "</text>\n";
  }

  std::string finish() {
    out << "</svg>\n";
    return out.str();
  }
};

inline std::string tick_label(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace svg_detail

inline std::string render_boxplot(const std::string& title, const std::string& y_label,
                                  const std::vector<BoxSpec>& boxes) {
  const double margin_left = 60, margin_right = 20, margin_top = 40, margin_bottom = 60;
  const double slot = 70;
  const double width = margin_left + margin_right + slot * std::max<std::size_t>(boxes.size(), 1);
  const double height = 360;
  svg_detail::Canvas canvas(width, height);

  double lo = 0.0, hi = 1.0;
  if (!boxes.empty()) {
    lo = boxes.front().p10;
    hi = boxes.front().p90;
    for (const BoxSpec& b : boxes) {
      lo = std::min({lo, b.p10, b.mean});
      hi = std::max({hi, b.p90, b.mean});
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double plot_h = height - margin_top - margin_bottom;
  const auto ypos = [&](double v) { return margin_top + plot_h * (hi - v) / (hi - lo); };

  canvas.text(width / 2, 20, title, 13);
  canvas.line(margin_left, margin_top, margin_left, height - margin_bottom, "black");
  canvas.line(margin_left, height - margin_bottom, width - margin_right, height - margin_bottom,
              "black");
  canvas.text(14, margin_top - 10, y_label, 11, "start");
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    canvas.line(margin_left - 4, ypos(v), margin_left, ypos(v), "black");
    canvas.text(margin_left - 8, ypos(v) + 4, svg_detail::tick_label(v), 10, "end");
  }

  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BoxSpec& b = boxes[i];
    const double cx = margin_left + slot * (static_cast<double>(i) + 0.5);
    const double half = 18;
    canvas.line(cx, ypos(b.p10), cx, ypos(b.p25), "black");
    canvas.line(cx, ypos(b.p75), cx, ypos(b.p90), "black");
    canvas.line(cx - half / 2, ypos(b.p10), cx + half / 2, ypos(b.p10), "black");
    canvas.line(cx - half / 2, ypos(b.p90), cx + half / 2, ypos(b.p90), "black");
    canvas.rect(cx - half, ypos(b.p75), 2 * half, ypos(b.p25) - ypos(b.p75), b.fill, "black");
    canvas.line(cx - half, ypos(b.median), cx + half, ypos(b.median), "red", 2.0);
    canvas.line(cx - half / 2, ypos(b.mean), cx + half / 2, ypos(b.mean), "green", 2.0);
    canvas.text(cx, height - margin_bottom + 16, b.label, 10);
  }
  return canvas.finish();
}

inline std::string render_histogram(const std::string& title, const std::string& x_label,
                                    const std::vector<double>& values, int bins,
                                    const std::string& fill = "#44aa44") {
  const double margin_left = 60, margin_right = 20, margin_top = 40, margin_bottom = 60;
  const double width = 520, height = 360;
  svg_detail::Canvas canvas(width, height);
  canvas.text(width / 2, 20, title, 13);
  canvas.line(margin_left, margin_top, margin_left, height - margin_bottom, "black");
  canvas.line(margin_left, height - margin_bottom, width - margin_right, height - margin_bottom,
              "black");
  canvas.text(width / 2, height - 16, x_label, 11);

  if (!values.empty() && bins > 0) {
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi <= lo) hi = lo + 1.0;
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (const double v : values) {
      int b = static_cast<int>((v - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      ++count[static_cast<std::size_t>(b)];
    }
    const int peak = *std::max_element(count.begin(), count.end());
    const double plot_w = width - margin_left - margin_right;
    const double plot_h = height - margin_top - margin_bottom;
    for (int b = 0; b < bins; ++b) {
      const double h = plot_h * count[static_cast<std::size_t>(b)] / std::max(peak, 1);
      canvas.rect(margin_left + plot_w * b / bins, height - margin_bottom - h, plot_w / bins - 1.0,
                  h, fill, "black");
    }
    canvas.text(margin_left, height - margin_bottom + 16, svg_detail::tick_label(lo), 10, "start");
    canvas.text(width - margin_right, height - margin_bottom + 16, svg_detail::tick_label(hi), 10,
                "end");
    canvas.text(margin_left - 8, margin_top + 4, std::to_string(peak), 10, "end");
  }
  return canvas.finish();
}

}  // namespace drcast
