#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace obscrl {

struct LabeledMatrix {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

// Header names are prefix0, prefix1, ...
std::vector<std::string> column_names(const std::string& prefix, Eigen::Index count);

// Values are written with 17 significant digits so they read back bit-exact.
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& header);
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::string& prefix);

// First line is the header row.
LabeledMatrix read_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace obscrl
