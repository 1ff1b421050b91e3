#include "obscrl/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "obscrl/errors.hpp"

namespace obscrl {

std::vector<std::string> column_names(const std::string& prefix, Eigen::Index count) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
    if (!header.empty() && static_cast<Eigen::Index>(header.size()) != m.cols()) {
        throw DimensionError("write_csv: header has " + std::to_string(header.size()) + " names for " +
                             std::to_string(m.cols()) + " columns");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::string& prefix) {
    write_csv(path, m, column_names(prefix, m.cols()));
}

LabeledMatrix read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    LabeledMatrix result;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) result.header.push_back(cell);
    }
    std::vector<double> flat;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t cols = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p <= end) {
            const char* comma = std::find(p, end, ',');
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(p, comma, v);
            if (ec != std::errc() || ptr != comma) {
                throw IoError(path.string() + ": bad number on data row " + std::to_string(rows + 1));
            }
            flat.push_back(v);
            ++cols;
            p = comma + 1;
        }
        if (cols != result.header.size()) {
            throw IoError(path.string() + ": row " + std::to_string(rows + 1) + " has " + std::to_string(cols) +
                          " fields, header has " + std::to_string(result.header.size()));
        }
        ++rows;
    }
    const auto r = static_cast<Eigen::Index>(rows);
    const auto c = static_cast<Eigen::Index>(result.header.size());
    result.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), r, c);
    return result;
}

}  // namespace obscrl
