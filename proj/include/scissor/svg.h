#pragma once

// Minimal SVG plotting: line plots with optional log y axis, equal-aspect
// shape overlays and panel collages. Output is deterministic text.

#include <string>
#include <vector>

namespace scissor::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;  // empty picks from the palette
  bool dashed = false;
  bool markers = false;
  bool line = true;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  // Same scale on both axes, for drawing shapes.
  bool equal_aspect = false;
  int width = 640;
  int height = 480;
};

std::string palette(size_t i);

// Non-finite points (and non-positive ones on a log axis) break the line.
std::string plot(const std::vector<Series>& series, const PlotOptions& options);

struct Panel {
  std::string title;
  std::vector<Series> series;
};

// Grid of small equal-aspect panels without axes.
std::string collage(const std::vector<Panel>& panels, int columns, int panel_size = 200);

}  // namespace scissor::svg
