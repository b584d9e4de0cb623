#pragma once

#include <string>
#include <vector>

namespace lindistill {

// One plotted group: a mean polyline with markers, plus optional faint
// per-trial points behind it. Lengths of xs and ys must match.
struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> point_xs;
  std::vector<double> point_ys;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;

  // Self-contained SVG document, fixed 640x480 canvas.
  std::string render() const;
};

}  // namespace lindistill
