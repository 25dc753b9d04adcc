#include "elastic/metrics_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace elastic {
namespace {

constexpr std::array<const char*, 5> kFixedColumns{"epoch", "phase", "lr", "train_loss_total",
                                                   "val_loss_total"};
constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c",
                                              "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string escape(const std::string& s) {
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

/// Tick step of 1, 2 or 5 times a power of ten giving about `target` ticks.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

struct Panel {
  double left, top, width, height;
  double x0, x1, y0, y1;

  double sx(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double sy(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

Panel make_panel(double left, double top, double width, double height, double x0, double x1,
                 double y0, double y1) {
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  return Panel{left, top, width, height, x0, x1, y0, y1};
}

void draw_axes(std::ostringstream& svg, const Panel& p, const std::string& ylabel) {
  svg << "<rect x=\"" << px(p.left) << "\" y=\"" << px(p.top) << "\" width=\"" << px(p.width)
      << "\" height=\"" << px(p.height) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  const double ystep = nice_step(p.y1 - p.y0, 5);
  for (double y = std::ceil(p.y0 / ystep) * ystep; y <= p.y1 + 1e-12; y += ystep) {
    svg << "<line x1=\"" << px(p.left - 4) << "\" y1=\"" << px(p.sy(y)) << "\" x2=\"" << px(p.left)
        << "\" y2=\"" << px(p.sy(y)) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << px(p.left - 6) << "\" y=\"" << px(p.sy(y) + 4)
        << "\" text-anchor=\"end\">" << num(std::round(y / ystep) * ystep) << "</text>\n";
  }
  const double xstep = std::max(1.0, nice_step(p.x1 - p.x0, 8));
  for (double x = std::ceil(p.x0 / xstep) * xstep; x <= p.x1 + 1e-12; x += xstep) {
    svg << "<line x1=\"" << px(p.sx(x)) << "\" y1=\"" << px(p.top + p.height) << "\" x2=\""
        << px(p.sx(x)) << "\" y2=\"" << px(p.top + p.height + 4) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << px(p.sx(x)) << "\" y=\"" << px(p.top + p.height + 16)
        << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
  }
  svg << "<text x=\"" << px(p.left + p.width / 2) << "\" y=\"" << px(p.top + p.height + 32)
      << "\" text-anchor=\"middle\">epoch</text>\n";
  svg << "<text transform=\"translate(" << px(p.left - 44) << "," << px(p.top + p.height / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

void polyline(std::ostringstream& svg, const Panel& p, const std::vector<double>& xs,
              const std::vector<double>& ys, const char* color, const char* dash, double opacity) {
  svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
  if (dash) svg << " stroke-dasharray=\"" << dash << "\"";
  if (opacity < 1.0) svg << " stroke-opacity=\"" << px(opacity) << "\"";
  svg << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    svg << (i ? " " : "") << px(p.sx(xs[i])) << "," << px(p.sy(ys[i]));
  }
  svg << "\"/>\n";
}

}  // namespace

std::vector<std::string> metrics_columns(std::size_t exits) {
  std::vector<std::string> cols(kFixedColumns.begin(), kFixedColumns.end());
  for (std::size_t i = 1; i <= exits; ++i) cols.push_back("val_err_" + std::to_string(i));
  return cols;
}

std::string metrics_csv(const MetricsLog& log, std::size_t exits) {
  std::ostringstream out;
  const auto cols = metrics_columns(exits);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : log.records) {
    if (r.val_error.size() != exits) throw ContractViolation("metrics record has wrong exit count");
    out << r.epoch << ',' << r.phase << ',' << num(r.lr) << ',' << num(r.train_loss_total) << ','
        << num(r.val_loss_total);
    for (double e : r.val_error) out << ',' << num(e);
    out << '\n';
  }
  return out.str();
}

std::vector<double> MetricsTable::column(std::size_t index) const {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.at(index));
  return out;
}

MetricsTable parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  MetricsTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_cells(line);
    if (table.columns.empty()) {
      if (cells.size() < kFixedColumns.size() + 1) {
        throw FormatError("line " + std::to_string(line_no) + ": header needs " +
                          std::to_string(kFixedColumns.size() + 1) + " or more columns");
      }
      const auto expected = metrics_columns(cells.size() - kFixedColumns.size());
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] != expected[i]) {
          throw FormatError("line " + std::to_string(line_no) + ": column " +
                            std::to_string(i + 1) + " is '" + cells[i] + "', expected '" +
                            expected[i] + "'");
        }
      }
      table.columns = cells;
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw FormatError("line " + std::to_string(line_no) + ": " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(table.columns.size()));
    }
    std::vector<double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const char* begin = cells[i].c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (cells[i].empty() || *end != '\0' || !std::isfinite(v)) {
        throw FormatError("line " + std::to_string(line_no) + ": column '" + table.columns[i] +
                          "' has non-numeric value '" + cells[i] + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw FormatError("line 1: missing header");
  if (table.rows.empty()) {
    throw FormatError("line " + std::to_string(line_no + 1) + ": no data rows after the header");
  }
  return table;
}

std::string render_curves_svg(const std::vector<CurveSeries>& series, const CurveOptions& options) {
  if (series.empty()) throw ContractViolation("no curves to render");
  const double margin_left = 70, margin_right = 190, margin_top = 30, panel_gap = 60;
  const int panels = options.per_exit ? 2 : 1;
  const double panel_h = options.height - margin_top - 50;
  const double total_h = margin_top + panels * panel_h + (panels - 1) * panel_gap + 50;
  const double panel_w = options.width - margin_left - margin_right;

  double x0 = 1e300, x1 = -1e300, ymax = 0, emax = 0;
  for (const auto& s : series) {
    for (const auto& r : s.table.rows) {
      x0 = std::min(x0, r[0]);
      x1 = std::max(x1, r[0]);
      ymax = std::max({ymax, r[3], r[4]});
      for (std::size_t i = 5; i < r.size(); ++i) emax = std::max(emax, r[i]);
    }
  }
  const Panel loss = make_panel(margin_left, margin_top, panel_w, panel_h, x0, x1, 0.0, ymax * 1.05);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << px(total_h) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << px(margin_left) << "\" y=\"18\" font-size=\"13\">total loss</text>\n";
  draw_axes(svg, loss, "loss");
  double legend_y = margin_top + 10;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& t = series[i].table;
    const char* color = kPalette[i % kPalette.size()];
    const auto xs = t.column(0);
    polyline(svg, loss, xs, t.column(3), color, nullptr, 1.0);
    polyline(svg, loss, xs, t.column(4), color, "6,4", 1.0);
    for (const bool val : {false, true}) {
      const double lx = margin_left + panel_w + 16;
      svg << "<line x1=\"" << px(lx) << "\" y1=\"" << px(legend_y) << "\" x2=\"" << px(lx + 24)
          << "\" y2=\"" << px(legend_y) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\""
          << (val ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
      svg << "<text x=\"" << px(lx + 30) << "\" y=\"" << px(legend_y + 4) << "\">"
          << escape(series[i].label) << (val ? " validation" : " training") << "</text>\n";
      legend_y += 16;
    }
  }

  if (options.per_exit) {
    const Panel err = make_panel(margin_left, margin_top + panel_h + panel_gap, panel_w, panel_h, x0,
                                 x1, 0.0, emax * 1.05);
    svg << "<text x=\"" << px(margin_left) << "\" y=\"" << px(err.top - 12)
        << "\" font-size=\"13\">validation error per exit</text>\n";
    draw_axes(svg, err, "error");
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& t = series[i].table;
      const std::size_t n = t.exits();
      for (std::size_t e = 0; e < n; ++e) {
        const double opacity = 0.3 + 0.7 * static_cast<double>(e + 1) / static_cast<double>(n);
        polyline(svg, err, t.column(0), t.column(5 + e), kPalette[i % kPalette.size()], nullptr,
                 opacity);
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace elastic
