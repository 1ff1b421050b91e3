#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace obscrl {

// Grid of scatter plots: panel (i, j) shows estimate column j against truth
// column i, points colored by `color` (viridis-like ramp over its range). At
// most `max_points` evenly strided samples are drawn.
std::string scatter_grid_svg(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate, const Eigen::VectorXd& color,
                             const std::vector<std::string>& truth_labels,
                             const std::vector<std::string>& estimate_labels, Eigen::Index max_points = 800);

// Heatmap of a matrix with entries in [0, 1], values printed in each cell.
std::string heatmap_svg(const Eigen::MatrixXd& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace obscrl
