#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dqt::svg {

struct LineSeries {
  std::string label;
  std::vector<double> y;
};

/// Shared-axis line chart; x is the sample index.
std::string line_plot(const std::string& title, const std::vector<LineSeries>& series);

/// Rows top to bottom, columns left to right, colour scaled to [min, max] of the grid.
std::string heatmap(const std::string& title, const std::vector<std::vector<double>>& grid,
                    const std::vector<std::string>& row_labels, const std::vector<std::string>& col_labels);

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace dqt::svg
