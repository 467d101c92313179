#ifndef PARMC_SVG_HPP
#define PARMC_SVG_HPP

#include <span>
#include <string>
#include <vector>

namespace parmc {

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct AxesSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool x_log = false;
  bool y_log = false;
  int width = 640;
  int height = 440;
  int margin_left = 70;
  int margin_right = 20;
  int margin_top = 30;
  int margin_bottom = 50;
};

// Standalone SVG 1.1 line/scatter plot, one polyline per series. Log axes
// reject non-positive values. Output bytes depend only on the input.
std::string render_svg_plot(std::span<const Series> series,
                            const AxesSpec& axes);

void emit_svg_plot(std::span<const Series> series, const AxesSpec& axes,
                   const std::string& path);

}  // namespace parmc

#endif
