#include "lindistill/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lindistill {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kLeft = 64;
constexpr double kRight = 620;
constexpr double kTop = 40;
constexpr double kBottom = 432;

const char* kPalette[] = {"#1b6ca8", "#c0392b", "#27ae60",
                          "#8e44ad", "#d68910", "#16747e"};
constexpr int kPaletteSize = 6;

std::string escape(const std::string& s) {
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

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (lo > hi) {
      lo = 0;
      hi = 1;
    }
    if (hi - lo < 1e-12) {
      const double pad = std::max(1e-6, std::abs(hi) * 0.1);
      lo -= pad;
      hi += pad;
    } else {
      const double pad = (hi - lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string Chart::render() const {
  Range xr, yr;
  for (const Series& s : series) {
    if (s.xs.size() != s.ys.size() || s.point_xs.size() != s.point_ys.size())
      throw std::invalid_argument("svg chart: series coordinate lengths differ");
    for (double v : s.xs) xr.add(v);
    for (double v : s.point_xs) xr.add(v);
    for (double v : s.ys) yr.add(v);
    for (double v : s.point_ys) yr.add(v);
  }
  xr.finish();
  yr.finish();

  const auto px = [&](double x) {
    return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kRight - kLeft);
  };
  const auto py = [&](double y) {
    return kBottom - (y - yr.lo) / (yr.hi - yr.lo) * (kBottom - kTop);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << (kWidth / 2)
        << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">"
        << escape(title) << "</text>\n";

  // axes and ticks
  out << "<g stroke=\"#444\" stroke-width=\"1\" fill=\"none\">\n";
  out << "<path d=\"M" << kLeft << " " << kTop << " V" << kBottom << " H"
      << kRight << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    out << "<line x1=\"" << px(fx) << "\" y1=\"" << kBottom << "\" x2=\""
        << px(fx) << "\" y2=\"" << (kBottom + 5)
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << px(fx) << "\" y=\"" << (kBottom + 18)
        << "\" text-anchor=\"middle\">" << short_num(fx) << "</text>\n";
    out << "<line x1=\"" << (kLeft - 5) << "\" y1=\"" << py(fy) << "\" x2=\""
        << kLeft << "\" y2=\"" << py(fy) << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << (kLeft - 8) << "\" y=\"" << (py(fy) + 4)
        << "\" text-anchor=\"end\">" << short_num(fy) << "</text>\n";
  }
  if (!x_label.empty())
    out << "<text x=\"" << ((kLeft + kRight) / 2) << "\" y=\""
        << (kBottom + 38) << "\" text-anchor=\"middle\" font-size=\"13\">"
        << escape(x_label) << "</text>\n";
  if (!y_label.empty())
    out << "<text x=\"16\" y=\"" << ((kTop + kBottom) / 2)
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
           "16 "
        << ((kTop + kBottom) / 2) << ")\">" << escape(y_label) << "</text>\n";
  out << "</g>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    out << "<g class=\"series\" data-label=\"" << escape(s.label) << "\">\n";
    for (std::size_t i = 0; i < s.point_xs.size(); ++i) {
      if (!std::isfinite(s.point_xs[i]) || !std::isfinite(s.point_ys[i]))
        continue;
      out << "<circle cx=\"" << px(s.point_xs[i]) << "\" cy=\""
          << py(s.point_ys[i]) << "\" r=\"2\" fill=\"" << color
          << "\" fill-opacity=\"0.3\"/>\n";
    }
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) {
        pen_down = false;
        continue;
      }
      path += pen_down ? " L" : " M";
      path += short_num(px(s.xs[i]));
      path += " ";
      path += short_num(py(s.ys[i]));
      pen_down = true;
    }
    if (!path.empty())
      out << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\""
          << color << "\" stroke-width=\"1.5\"/>\n";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      out << "<circle cx=\"" << px(s.xs[i]) << "\" cy=\"" << py(s.ys[i])
          << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    }
    out << "</g>\n";
  }

  // legend
  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double ly = kTop + 8 + 16 * static_cast<double>(si);
    out << "<rect x=\"" << (kRight - 132) << "\" y=\"" << (ly - 8)
        << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[si % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << (kRight - 118) << "\" y=\"" << ly << "\">"
        << escape(series[si].label) << "</text>\n";
  }
  out << "</g>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace lindistill
