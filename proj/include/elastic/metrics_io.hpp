#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "elastic/training.hpp"

namespace elastic {

/// Column names: epoch, phase, lr, train_loss_total, val_loss_total,
/// val_err_1 .. val_err_<exits>.
std::vector<std::string> metrics_columns(std::size_t exits);

std::string metrics_csv(const MetricsLog& log, std::size_t exits);

/// Parsed metrics file.
struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t exits() const { return columns.size() - 5; }
  std::vector<double> column(std::size_t index) const;
};

/// Throws FormatError naming the offending line for a malformed header,
/// a short or long row, a non-numeric cell, or a file with no data rows.
MetricsTable parse_metrics_csv(const std::string& text);

struct CurveSeries {
  std::string label;
  MetricsTable table;
};

struct CurveOptions {
  bool per_exit = false;  // add a panel with every exit's validation error
  int width = 720;
  int height = 420;
};

/// Training and validation total-loss curves of every series as an SVG
/// document. Output depends only on the inputs.
std::string render_curves_svg(const std::vector<CurveSeries>& series, const CurveOptions& options = {});

}  // namespace elastic
