#include "scissor/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace scissor::svg {

namespace {

struct Box {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  bool empty() const { return !(x0 <= x1 && y0 <= y1); }
  void Add(double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  void Pad() {
    if (empty()) {
      x0 = y0 = 0.0;
      x1 = y1 = 1.0;
    }
    if (x1 - x0 < 1e-12) {
      x0 -= 0.5;
      x1 += 0.5;
    }
    if (y1 - y0 < 1e-12) {
      y0 -= 0.5;
      y1 += 0.5;
    }
  }
};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string Escape(const std::string& s) {
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

bool Usable(double x, double y, bool log_y) {
  return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0.0);
}

// Step of about `target` ticks from {1, 2, 5} x 10^k.
double NiceStep(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0;
  return nice * mag;
}

struct Mapper {
  Box box;
  double left, top, w, h;
  double X(double x) const { return left + (x - box.x0) / (box.x1 - box.x0) * w; }
  double Y(double y) const { return top + h - (y - box.y0) / (box.y1 - box.y0) * h; }
};

// Polyline segments split at unusable points.
std::string Paths(const Series& s, const Mapper& m, bool log_y, const std::string& color,
                  double stroke) {
  std::string out;
  std::string d;
  auto flush = [&]() {
    if (d.empty()) return;
    out += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
           Num(stroke) + "\"";
    if (s.dashed) out += " stroke-dasharray=\"6,4\"";
    out += "/>\n";
    d.clear();
  };
  const size_t n = std::min(s.x.size(), s.y.size());
  if (s.line) {
    for (size_t i = 0; i < n; ++i) {
      if (!Usable(s.x[i], s.y[i], log_y)) {
        flush();
        continue;
      }
      const double y = log_y ? std::log10(s.y[i]) : s.y[i];
      d += (d.empty() ? "M" : " L") + Num(m.X(s.x[i])) + "," + Num(m.Y(y));
    }
    flush();
  }
  if (s.markers) {
    for (size_t i = 0; i < n; ++i) {
      if (!Usable(s.x[i], s.y[i], log_y)) continue;
      const double y = log_y ? std::log10(s.y[i]) : s.y[i];
      out += "<circle cx=\"" + Num(m.X(s.x[i])) + "\" cy=\"" + Num(m.Y(y)) +
             "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    }
  }
  return out;
}

Box Bounds(const std::vector<Series>& series, bool log_y) {
  Box b;
  for (const Series& s : series) {
    const size_t n = std::min(s.x.size(), s.y.size());
    for (size_t i = 0; i < n; ++i) {
      if (Usable(s.x[i], s.y[i], log_y)) b.Add(s.x[i], log_y ? std::log10(s.y[i]) : s.y[i]);
    }
  }
  b.Pad();
  return b;
}

// Grows the box so one data unit has the same length on both axes.
void EqualAspect(Box* b, double w, double h) {
  const double sx = (b->x1 - b->x0) / w;
  const double sy = (b->y1 - b->y0) / h;
  const double s = std::max(sx, sy);
  const double cx = 0.5 * (b->x0 + b->x1), cy = 0.5 * (b->y0 + b->y1);
  b->x0 = cx - 0.5 * s * w;
  b->x1 = cx + 0.5 * s * w;
  b->y0 = cy - 0.5 * s * h;
  b->y1 = cy + 0.5 * s * h;
}

}  // namespace

std::string palette(size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return kColors[i % (sizeof kColors / sizeof kColors[0])];
}

std::string plot(const std::vector<Series>& series, const PlotOptions& o) {
  const double left = 70, right = 20, top = o.title.empty() ? 20 : 40, bottom = 50;
  Mapper m{Bounds(series, o.log_y), left, top, o.width - left - right, o.height - top - bottom};
  if (o.equal_aspect) {
    EqualAspect(&m.box, m.w, m.h);
  } else {
    const double px = 0.03 * (m.box.x1 - m.box.x0), py = 0.05 * (m.box.y1 - m.box.y0);
    m.box.x0 -= px;
    m.box.x1 += px;
    m.box.y0 -= py;
    m.box.y1 += py;
  }
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(o.width) + "\" height=\"" + std::to_string(o.height) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!o.title.empty()) {
    out += "<text x=\"" + Num(o.width / 2.0) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
           Escape(o.title) + "</text>\n";
  }
  out += "<rect x=\"" + Num(left) + "\" y=\"" + Num(top) + "\" width=\"" + Num(m.w) +
         "\" height=\"" + Num(m.h) + "\" fill=\"none\" stroke=\"black\"/>\n";
  // x ticks
  const double xs = NiceStep(m.box.x1 - m.box.x0, 6);
  for (double t = std::ceil(m.box.x0 / xs) * xs; t <= m.box.x1 + 1e-9 * xs; t += xs) {
    const double px = m.X(t);
    out += "<line x1=\"" + Num(px) + "\" y1=\"" + Num(top + m.h) + "\" x2=\"" + Num(px) +
           "\" y2=\"" + Num(top + m.h + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + Num(px) + "\" y=\"" + Num(top + m.h + 18) +
           "\" text-anchor=\"middle\">" + Label(std::abs(t) < 1e-12 * xs ? 0.0 : t) +
           "</text>\n";
  }
  // y ticks: decades on a log axis
  const double ys = o.log_y ? std::max(1.0, std::round(NiceStep(m.box.y1 - m.box.y0, 6)))
                            : NiceStep(m.box.y1 - m.box.y0, 6);
  for (double t = std::ceil(m.box.y0 / ys) * ys; t <= m.box.y1 + 1e-9 * ys; t += ys) {
    const double py = m.Y(t);
    const double shown = o.log_y ? std::pow(10.0, t) : (std::abs(t) < 1e-12 * ys ? 0.0 : t);
    out += "<line x1=\"" + Num(left - 5) + "\" y1=\"" + Num(py) + "\" x2=\"" + Num(left) +
           "\" y2=\"" + Num(py) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + Num(left - 8) + "\" y=\"" + Num(py + 4) + "\" text-anchor=\"end\">" +
           Label(shown) + "</text>\n";
  }
  if (!o.x_label.empty()) {
    out += "<text x=\"" + Num(left + m.w / 2) + "\" y=\"" + Num(o.height - 10.0) +
           "\" text-anchor=\"middle\">" + Escape(o.x_label) + "</text>\n";
  }
  if (!o.y_label.empty()) {
    out += "<text transform=\"translate(16," + Num(top + m.h / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + Escape(o.y_label) + "</text>\n";
  }
  out += "<svg x=\"" + Num(left) + "\" y=\"" + Num(top) + "\" width=\"" + Num(m.w) +
         "\" height=\"" + Num(m.h) + "\" viewBox=\"" + Num(left) + " " + Num(top) + " " +
         Num(m.w) + " " + Num(m.h) + "\" overflow=\"hidden\">\n";
  for (size_t i = 0; i < series.size(); ++i) {
    const std::string color = series[i].color.empty() ? palette(i) : series[i].color;
    out += Paths(series[i], m, o.log_y, color, 1.5);
  }
  out += "</svg>\n";
  // legend
  double ly = top + 16;
  for (size_t i = 0; i < series.size(); ++i) {
    if (series[i].label.empty()) continue;
    const std::string color = series[i].color.empty() ? palette(i) : series[i].color;
    const double lx = left + m.w - 150;
    out += "<line x1=\"" + Num(lx) + "\" y1=\"" + Num(ly - 4) + "\" x2=\"" + Num(lx + 20) +
           "\" y2=\"" + Num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" +
           (series[i].dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
    out += "<text x=\"" + Num(lx + 26) + "\" y=\"" + Num(ly) + "\">" + Escape(series[i].label) +
           "</text>\n";
    ly += 16;
  }
  out += "</svg>\n";
  return out;
}

std::string collage(const std::vector<Panel>& panels, int columns, int panel_size) {
  columns = std::max(1, columns);
  const int rows = static_cast<int>((panels.size() + columns - 1) / columns);
  const int width = columns * panel_size;
  const int height = std::max(1, rows) * panel_size;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (size_t k = 0; k < panels.size(); ++k) {
    const double ox = static_cast<double>(k % columns) * panel_size;
    const double oy = static_cast<double>(k / columns) * panel_size;
    const double pad = 10, title = 18;
    Mapper m{Bounds(panels[k].series, false), ox + pad, oy + title, panel_size - 2 * pad,
             panel_size - title - pad};
    EqualAspect(&m.box, m.w, m.h);
    out += "<rect x=\"" + Num(ox + 1) + "\" y=\"" + Num(oy + 1) + "\" width=\"" +
           Num(panel_size - 2.0) + "\" height=\"" + Num(panel_size - 2.0) +
           "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    out += "<text x=\"" + Num(ox + panel_size / 2.0) + "\" y=\"" + Num(oy + 13) +
           "\" text-anchor=\"middle\">" + Escape(panels[k].title) + "</text>\n";
    for (size_t i = 0; i < panels[k].series.size(); ++i) {
      const Series& s = panels[k].series[i];
      out += Paths(s, m, false, s.color.empty() ? palette(i) : s.color, 1.2);
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace scissor::svg
