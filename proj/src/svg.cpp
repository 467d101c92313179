#include "parmc/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "parmc/csv.hpp"
#include "parmc/errors.hpp"

namespace parmc {

namespace {

constexpr const char* kPalette[] = {"#4682b4", "#d62728", "#2ca02c",
                                    "#ff7f0e", "#9467bd", "#8c564b",
                                    "#17becf", "#7f7f7f"};

std::string px(double v) {
  char buf[32];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

struct AxisScale {
  double lo;
  double hi;
  bool log;

  double to_unit(double v) const {
    const double a = log ? std::log10(v) : v;
    const double l = log ? std::log10(lo) : lo;
    const double h = log ? std::log10(hi) : hi;
    if (h == l) return 0.5;
    return (a - l) / (h - l);
  }
};

AxisScale make_scale(std::span<const Series> series, bool take_x, bool log,
                     const char* axis_name) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    const auto& vals = take_x ? s.xs : s.ys;
    for (double v : vals) {
      if (!std::isfinite(v))
        throw DomainError(std::string("svg plot: non-finite ") + axis_name +
                          " value");
      if (log && v <= 0.0)
        throw DomainError(std::string("svg plot: log ") + axis_name +
                          " axis requires positive values");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (lo == hi) {  // degenerate range: widen symmetrically
    if (log) {
      lo /= 2.0;
      hi *= 2.0;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  return AxisScale{lo, hi, log};
}

std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw_step = span / 4.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * m >= raw_step) {
      step = mag * m;
      break;
    }
  }
  std::vector<double> ticks;
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + step * 1e-9; t += step) ticks.push_back(t);
  return ticks;
}

std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> ticks;
  const int first = static_cast<int>(std::ceil(std::log10(lo) - 1e-9));
  const int last = static_cast<int>(std::floor(std::log10(hi) + 1e-9));
  for (int e = first; e <= last; ++e) ticks.push_back(std::pow(10.0, e));
  if (ticks.empty()) ticks = {lo, hi};
  return ticks;
}

void escape_into(std::string& out, const std::string& text) {
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
}

}  // namespace

std::string render_svg_plot(std::span<const Series> series,
                            const AxesSpec& axes) {
  if (series.empty()) throw DomainError("svg plot: no series");
  for (const auto& s : series) {
    if (s.xs.empty() || s.xs.size() != s.ys.size())
      throw DomainError("svg plot: series '" + s.name +
                        "' empty or size mismatch");
  }

  const AxisScale xscale = make_scale(series, true, axes.x_log, "x");
  const AxisScale yscale = make_scale(series, false, axes.y_log, "y");

  const double plot_w =
      static_cast<double>(axes.width - axes.margin_left - axes.margin_right);
  const double plot_h =
      static_cast<double>(axes.height - axes.margin_top - axes.margin_bottom);
  const double x0 = static_cast<double>(axes.margin_left);
  const double y0 = static_cast<double>(axes.margin_top);

  auto map_x = [&](double v) { return x0 + xscale.to_unit(v) * plot_w; };
  auto map_y = [&](double v) {
    return y0 + (1.0 - yscale.to_unit(v)) * plot_h;
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"";
  out += format_u64(static_cast<std::uint64_t>(axes.width));
  out += "\" height=\"";
  out += format_u64(static_cast<std::uint64_t>(axes.height));
  out += "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (!axes.title.empty()) {
    out += "<text x=\"" + px(axes.width / 2.0) +
           "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\" "
           "font-family=\"sans-serif\">";
    escape_into(out, axes.title);
    out += "</text>\n";
  }

  // frame
  out += "<rect x=\"" + px(x0) + "\" y=\"" + px(y0) + "\" width=\"" +
         px(plot_w) + "\" height=\"" + px(plot_h) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  const auto xticks = axes.x_log ? log_ticks(xscale.lo, xscale.hi)
                                 : linear_ticks(xscale.lo, xscale.hi);
  for (double t : xticks) {
    const double xp = map_x(t);
    out += "<line x1=\"" + px(xp) + "\" y1=\"" + px(y0 + plot_h) +
           "\" x2=\"" + px(xp) + "\" y2=\"" + px(y0 + plot_h + 5) +
           "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + px(xp) + "\" y=\"" + px(y0 + plot_h + 18) +
           "\" text-anchor=\"middle\" font-size=\"10\" "
           "font-family=\"sans-serif\">" +
           format_double(t) + "</text>\n";
  }
  const auto yticks = axes.y_log ? log_ticks(yscale.lo, yscale.hi)
                                 : linear_ticks(yscale.lo, yscale.hi);
  for (double t : yticks) {
    const double yp = map_y(t);
    out += "<line x1=\"" + px(x0 - 5) + "\" y1=\"" + px(yp) + "\" x2=\"" +
           px(x0) + "\" y2=\"" + px(yp) + "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + px(x0 - 8) + "\" y=\"" + px(yp + 3) +
           "\" text-anchor=\"end\" font-size=\"10\" "
           "font-family=\"sans-serif\">" +
           format_double(t) + "</text>\n";
  }

  if (!axes.x_label.empty()) {
    out += "<text x=\"" + px(x0 + plot_w / 2.0) + "\" y=\"" +
           px(static_cast<double>(axes.height) - 8.0) +
           "\" text-anchor=\"middle\" font-size=\"12\" "
           "font-family=\"sans-serif\">";
    escape_into(out, axes.x_label);
    out += "</text>\n";
  }
  if (!axes.y_label.empty()) {
    out += "<text x=\"14\" y=\"" + px(y0 + plot_h / 2.0) +
           "\" text-anchor=\"middle\" font-size=\"12\" "
           "font-family=\"sans-serif\" transform=\"rotate(-90 14 " +
           px(y0 + plot_h / 2.0) + ")\">";
    escape_into(out, axes.y_label);
    out += "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(char*))];
    out += "<polyline fill=\"none\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (i) out.push_back(' ');
      out += px(map_x(s.xs[i])) + "," + px(map_y(s.ys[i]));
    }
    out += "\"/>\n";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      out += "<circle cx=\"" + px(map_x(s.xs[i])) + "\" cy=\"" +
             px(map_y(s.ys[i])) + "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    }
    // legend entry
    const double ly = y0 + 14.0 + 16.0 * static_cast<double>(si);
    out += "<line x1=\"" + px(x0 + plot_w - 120) + "\" y1=\"" + px(ly - 4) +
           "\" x2=\"" + px(x0 + plot_w - 100) + "\" y2=\"" + px(ly - 4) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + px(x0 + plot_w - 95) + "\" y=\"" + px(ly) +
           "\" font-size=\"10\" font-family=\"sans-serif\">";
    escape_into(out, s.name);
    out += "</text>\n";
  }

  out += "</svg>\n";
  return out;
}

void emit_svg_plot(std::span<const Series> series, const AxesSpec& axes,
                   const std::string& path) {
  write_text_file(path, render_svg_plot(series, axes));
}

}  // namespace parmc
