#include "plab/emit.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace plab {

std::string fmt_g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

namespace {

// Coordinates are written with fixed precision so output is stable.
std::string c2(double v) { return fmt::format("{:.2f}", v); }

std::string escape(std::string_view s) {
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

}  // namespace

Svg::Svg(double width, double height) : w_(width), h_(height) {}

void Svg::rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke) {
  body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"{}\"/>\n", c2(x),
                       c2(y), c2(w), c2(h), fill, stroke);
}

void Svg::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width, bool dashed) {
  body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                       c2(x1), c2(y1), c2(x2), c2(y2), stroke, c2(width),
                       dashed ? " stroke-dasharray=\"4 3\"" : "");
}

void Svg::polyline(const std::vector<double>& xs, const std::vector<double>& ys, std::string_view stroke,
                   double width, bool dashed) {
  std::string pts;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (i) pts += ' ';
    pts += c2(xs[i]) + "," + c2(ys[i]);
  }
  body_ += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n", pts, stroke,
                       c2(width), dashed ? " stroke-dasharray=\"4 3\"" : "");
}

void Svg::circle(double cx, double cy, double r, std::string_view fill) {
  body_ += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n", c2(cx), c2(cy), c2(r), fill);
}

void Svg::text(double x, double y, std::string_view s, double size, std::string_view anchor) {
  body_ += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{}\">{}</text>\n", c2(x), c2(y),
                       c2(size), anchor, escape(s));
}

void Svg::comment(std::string_view s) { body_ += "<!-- " + escape(s) + " -->\n"; }

std::string Svg::str() const {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n{2}</svg>\n",
      c2(w_), c2(h_), body_);
}

std::string line_chart(std::string_view title, std::string_view x_label, const std::vector<Series>& series,
                       bool log_x, bool unit_y, std::string_view note) {
  constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 60;
  Svg svg(W, H);
  if (!note.empty()) svg.comment(note);
  double xmin = INFINITY, xmax = -INFINITY, ymin = unit_y ? 0.0 : INFINITY, ymax = unit_y ? 1.0 : -INFINITY;
  const auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  for (const auto& s : series) {
    for (double x : s.x) {
      if (log_x && !(x > 0)) continue;
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
    }
    if (!unit_y) {
      for (double y : s.y) {
        if (!std::isfinite(y)) continue;
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pw = W - L - R, ph = H - T - B;
  const auto px = [&](double x) { return L + (tx(x) - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return T + (ymax - y) / (ymax - ymin) * ph; };

  svg.text(W / 2 - R / 2, 24, title, 15, "middle");
  svg.rect(L, T, pw, ph, "none", "black");
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    svg.line(L, py(y), L + pw, py(y), "#dddddd", 0.5);
    svg.text(L - 6, py(y) + 4, fmt::format("{:.3g}", y), 10, "end");
  }
  std::vector<double> ticks;
  for (const auto& s : series)
    for (double x : s.x)
      if (!log_x || x > 0) ticks.push_back(x);
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (double x : ticks) svg.text(px(x), T + ph + 16, fmt::format("{:.4g}", x), 10, "middle");
  svg.text(L + pw / 2, H - 16, x_label, 12, "middle");

  double ly = T + 10;
  for (const auto& s : series) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if ((log_x && !(s.x[i] > 0)) || !std::isfinite(s.y[i])) continue;
      xs.push_back(px(s.x[i]));
      ys.push_back(py(s.y[i]));
    }
    svg.polyline(xs, ys, s.color, 2.0, s.dashed);
    for (std::size_t i = 0; i < xs.size(); ++i) svg.circle(xs[i], ys[i], 3, s.color);
    svg.line(L + pw + 12, ly, L + pw + 36, ly, s.color, 2.0, s.dashed);
    svg.text(L + pw + 42, ly + 4, s.name, 11);
    ly += 18;
  }
  return svg.str();
}

}  // namespace plab
