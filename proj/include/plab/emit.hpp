#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace plab {

/// Shortest round-trip-safe form used in every CSV: 17 significant digits.
std::string fmt_g17(double v);

/// Minimal deterministic SVG builder with a fixed canvas.
class Svg {
 public:
  Svg(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none");
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            bool dashed = false);
  void polyline(const std::vector<double>& xs, const std::vector<double>& ys, std::string_view stroke,
                double width = 1.5, bool dashed = false);
  void circle(double cx, double cy, double r, std::string_view fill);
  void text(double x, double y, std::string_view s, double size = 12.0, std::string_view anchor = "start");
  void comment(std::string_view s);

  std::string str() const;

 private:
  double w_, h_;
  std::string body_;
};

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

/// Line chart with a y range of [0, 1] or fitted to the data.
std::string line_chart(std::string_view title, std::string_view x_label, const std::vector<Series>& series,
                       bool log_x, bool unit_y, std::string_view note);

}  // namespace plab
