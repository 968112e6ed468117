#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "epdyn/errors.hpp"
#include "epdyn/model.hpp"

namespace epd::io {

using json = nlohmann::ordered_json;

/// 17 significant digits.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

template <class Range>
json complex_array(const Range& r) {
  json a = json::array();
  for (const auto& z : r) a.push_back(complex_json(z));
  return a;
}

inline json real_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size())
      throw NumericalError("csv row has " + std::to_string(row.size()) + " cells for " +
                           std::to_string(header.size()) + " columns");
    rows.push_back(std::move(row));
  }

  std::string str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

/// Appends re_<name>, im_<name> to a header.
inline void complex_columns(std::vector<std::string>& header, const std::string& name) {
  header.push_back("re_" + name);
  header.push_back("im_" + name);
}

inline void complex_cells(std::vector<std::string>& row, cplx z) {
  row.push_back(num(z.real()));
  row.push_back(num(z.imag()));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw NumericalError("write failed for '" + path.string() + "'");
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  std::vector<double> guide_lines;  // horizontal, dashed gray
  bool log_y = false;
};

inline std::string escape_xml(const std::string& s) {
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

inline std::string short_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

/// Self-contained SVG line plot with axes, ticks, legend and optional guide lines.
inline std::string render_svg(const LinePlot& plot) {
  const double w = 720, h = 460, ml = 80, mr = 160, mt = 40, mb = 60;
  const double pw = w - ml - mr, ph = h - mt - mb;
  auto ty = [&](double y) { return plot.log_y ? (y > 0 ? std::log10(y) : std::nan("")) : y; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double yy = ty(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(yy)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, yy);
      y1 = std::max(y1, yy);
    }
  }
  for (double g : plot.guide_lines) {
    const double yy = ty(g);
    if (std::isfinite(yy)) {
      y0 = std::min(y0, yy);
      y1 = std::max(y1, yy);
    }
  }
  if (!(x1 > x0)) { x0 = std::isfinite(x0) ? x0 - 0.5 : 0.0; x1 = x0 + 1.0; }
  if (!(y1 > y0)) { y0 = std::isfinite(y0) ? y0 - 0.5 : 0.0; y1 = y0 + 1.0; }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto sx = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << ml + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(plot.title)
    << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0, yv = y0 + (y1 - y0) * k / 5.0;
    o << "<line x1=\"" << sx(xv) << "\" y1=\"" << mt + ph << "\" x2=\"" << sx(xv) << "\" y2=\"" << mt + ph + 5
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << sx(xv) << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">" << short_num(xv)
      << "</text>\n";
    o << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << ml << "\" y2=\"" << sy(yv)
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << ml - 8 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
      << (plot.log_y ? "1e" + short_num(yv) : short_num(yv)) << "</text>\n";
  }
  o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\">" << escape_xml(plot.x_label)
    << "</text>\n";
  o << "<text x=\"18\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << mt + ph / 2
    << ")\">" << escape_xml(plot.y_label) << "</text>\n";
  for (double g : plot.guide_lines) {
    const double yy = ty(g);
    if (!std::isfinite(yy)) continue;
    o << "<line x1=\"" << ml << "\" y1=\"" << sy(yy) << "\" x2=\"" << ml + pw << "\" y2=\"" << sy(yy)
      << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
  }
  std::size_t legend = 0;
  for (const auto& s : plot.series) {
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double yy = ty(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(yy)) {
        pen = false;
        continue;
      }
      d += (pen ? " L" : " M") + short_num(sx(s.x[i])) + ' ' + short_num(sy(yy));
      pen = true;
    }
    o << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"6 3\"" : "") << "/>\n";
    const double ly = mt + 12 + 18.0 * double(legend++);
    o << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 36 << "\" y2=\"" << ly
      << "\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"6 3\"" : "")
      << "/>\n";
    o << "<text x=\"" << ml + pw + 42 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return p;
}

}  // namespace epd::io
