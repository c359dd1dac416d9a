#include "semloc/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "semloc/errors.hpp"

namespace semloc {
namespace {

constexpr std::array<const char*, 8> kPalette{"#d62728", "#1f77b4", "#ff7f0e", "#9467bd",
                                              "#8c564b", "#e377c2", "#17becf", "#bcbd22"};

std::string num(double v, int decimals = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::string overlay_svg(const VineyardWorld& world, const Trajectory& ground_truth,
                        const std::vector<NamedTrajectory>& estimates, const std::string& title) {
  const Bounds& b = world.bounds;
  const double scale = 12.0;  // px per metre
  const double margin = 30.0;
  const double legend = 20.0 * static_cast<double>(estimates.size() + 1) + 10.0;
  const double w = (b.max_x - b.min_x) * scale + 2 * margin;
  const double h = (b.max_y - b.min_y) * scale + 2 * margin + legend;
  auto px = [&](double x) { return margin + (x - b.min_x) * scale; };
  auto py = [&](double y) { return margin + legend + (b.max_y - y) * scale; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w, 0) << "\" height=\""
      << num(h, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << margin << "\" y=\"18\" font-size=\"14\">" << escape(title) << "</text>\n";

  for (const auto& row : world.rows) {
    for (const auto& lm : row.landmarks) {
      const bool pole = lm.cls == SemanticClass::pole;
      svg << "<circle cx=\"" << num(px(lm.position.x)) << "\" cy=\"" << num(py(lm.position.y))
          << "\" r=\"" << (pole ? 3 : 2) << "\" fill=\"" << (pole ? "#333333" : "#2ca02c")
          << "\"/>\n";
    }
  }

  auto polyline = [&](const Trajectory& t, const char* colour, double width) {
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << num(width, 1)
        << "\" points=\"";
    for (const auto& s : t.samples) svg << num(px(s.pose.x)) << ',' << num(py(s.pose.y)) << ' ';
    svg << "\"/>\n";
  };
  polyline(ground_truth, "#000000", 2.0);
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].trajectory) polyline(*estimates[i].trajectory, kPalette[i % kPalette.size()], 1.2);
  }

  auto legend_entry = [&](std::size_t slot, const char* colour, const std::string& name) {
    const double y = 30.0 + 20.0 * static_cast<double>(slot);
    svg << "<line x1=\"" << margin << "\" y1=\"" << num(y) << "\" x2=\"" << margin + 24
        << "\" y2=\"" << num(y) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << margin + 30 << "\" y=\"" << num(y + 4) << "\">" << escape(name)
        << "</text>\n";
  };
  legend_entry(0, "#000000", "ground truth");
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    legend_entry(i + 1, kPalette[i % kPalette.size()], estimates[i].name);
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string heatmap_svg(const std::vector<double>& row_values, const std::vector<double>& col_values,
                        const std::vector<std::vector<double>>& cells, const std::string& title,
                        const std::string& row_label, const std::string& col_label,
                        std::pair<std::size_t, std::size_t> highlight) {
  if (cells.size() != row_values.size()) throw InvalidArgument("heatmap row count mismatch");
  for (const auto& r : cells) {
    if (r.size() != col_values.size()) throw InvalidArgument("heatmap column count mismatch");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : cells) {
    for (const double v : r) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const double cell = 60.0;
  const double left = 80.0;
  const double top = 50.0;
  const double w = left + cell * static_cast<double>(col_values.size()) + 20.0;
  const double h = top + cell * static_cast<double>(row_values.size()) + 50.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w, 0) << "\" height=\""
      << num(h, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t i = 0; i < row_values.size(); ++i) {
    for (std::size_t j = 0; j < col_values.size(); ++j) {
      const double v = cells[i][j];
      const double f = (std::isfinite(v) && hi > lo) ? (v - lo) / (hi - lo) : 0.0;
      // Low values light yellow, high values dark red.
      const int r = static_cast<int>(255 - 80 * f);
      const int g = static_cast<int>(245 - 200 * f);
      const int b = static_cast<int>(200 - 170 * f);
      const double x = left + cell * static_cast<double>(j);
      const double y = top + cell * static_cast<double>(i);
      svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n";
      svg << "<text x=\"" << num(x + cell / 2) << "\" y=\"" << num(y + cell / 2 + 4)
          << "\" text-anchor=\"middle\">" << (std::isfinite(v) ? num(v, 3) : "n/a") << "</text>\n";
    }
  }
  if (highlight.first < row_values.size() && highlight.second < col_values.size()) {
    svg << "<rect x=\"" << num(left + cell * static_cast<double>(highlight.second)) << "\" y=\""
        << num(top + cell * static_cast<double>(highlight.first)) << "\" width=\"" << cell
        << "\" height=\"" << cell << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"3\"/>\n";
  }
  for (std::size_t i = 0; i < row_values.size(); ++i) {
    svg << "<text x=\"" << left - 8 << "\" y=\"" << num(top + cell * (static_cast<double>(i) + 0.5) + 4)
        << "\" text-anchor=\"end\">" << num(row_values[i]) << "</text>\n";
  }
  for (std::size_t j = 0; j < col_values.size(); ++j) {
    svg << "<text x=\"" << num(left + cell * (static_cast<double>(j) + 0.5)) << "\" y=\""
        << num(top + cell * static_cast<double>(row_values.size()) + 16)
        << "\" text-anchor=\"middle\">" << num(col_values[j]) << "</text>\n";
  }
  svg << "<text x=\"" << num(left + cell * static_cast<double>(col_values.size()) / 2) << "\" y=\""
      << num(h - 10) << "\" text-anchor=\"middle\">" << escape(col_label) << "</text>\n";
  svg << "<text x=\"12\" y=\"" << num(top - 10) << "\">" << escape(row_label) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace semloc
