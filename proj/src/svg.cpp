#include "obscrl/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "obscrl/errors.hpp"

namespace obscrl {

namespace {

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string ramp(double t) {
    // Piecewise-linear approximation of viridis.
    static constexpr std::array<std::array<double, 3>, 5> stops{{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), 3);
    const double f = t - static_cast<double>(k);
    std::array<int, 3> c{};
    for (std::size_t i = 0; i < 3; ++i)
        c[i] = static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i])));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace

std::string scatter_grid_svg(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate, const Eigen::VectorXd& color,
                             const std::vector<std::string>& truth_labels,
                             const std::vector<std::string>& estimate_labels, Eigen::Index max_points) {
    if (truth.rows() != estimate.rows() || color.size() != truth.rows()) {
        throw DimensionError("scatter_grid_svg: row counts differ");
    }
    const Eigen::Index rows = truth.cols();
    const Eigen::Index cols = estimate.cols();
    const double panel = 140.0;
    const double gap = 16.0;
    const double margin = 40.0;
    const double width = margin + static_cast<double>(cols) * (panel + gap);
    const double height = margin + static_cast<double>(rows) * (panel + gap);
    const Eigen::Index stride = std::max<Eigen::Index>(1, (truth.rows() + max_points - 1) / std::max<Eigen::Index>(1, max_points));
    const double cmin = color.minCoeff();
    const double cspan = std::max(color.maxCoeff() - cmin, 1e-300);

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0) << "\" height=\"" << fmt(height, 0)
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double x0 = margin + static_cast<double>(j) * (panel + gap);
        os << "<text x=\"" << fmt(x0 + panel / 2) << "\" y=\"14\" text-anchor=\"middle\">"
           << escape(estimate_labels.at(static_cast<std::size_t>(j))) << "</text>\n";
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double y0 = margin + static_cast<double>(i) * (panel + gap);
        os << "<text x=\"4\" y=\"" << fmt(y0 + panel / 2) << "\">" << escape(truth_labels.at(static_cast<std::size_t>(i)))
           << "</text>\n";
        const double tmin = truth.col(i).minCoeff();
        const double tspan = std::max(truth.col(i).maxCoeff() - tmin, 1e-300);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double x0 = margin + static_cast<double>(j) * (panel + gap);
            const double emin = estimate.col(j).minCoeff();
            const double espan = std::max(estimate.col(j).maxCoeff() - emin, 1e-300);
            os << "<g><rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(panel)
               << "\" height=\"" << fmt(panel) << "\" fill=\"none\" stroke=\"#888\"/>\n";
            for (Eigen::Index m = 0; m < truth.rows(); m += stride) {
                const double px = x0 + 3 + (panel - 6) * (truth(m, i) - tmin) / tspan;
                const double py = y0 + panel - 3 - (panel - 6) * (estimate(m, j) - emin) / espan;
                os << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"1.2\" fill=\""
                   << ramp((color(m) - cmin) / cspan) << "\"/>";
            }
            os << "\n</g>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string heatmap_svg(const Eigen::MatrixXd& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title) {
    const double cell = 48.0;
    const double left = 60.0;
    const double top = 48.0;
    const double width = left + static_cast<double>(values.cols()) * cell + 10.0;
    const double height = top + static_cast<double>(values.rows()) * cell + 10.0;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0) << "\" height=\"" << fmt(height, 0)
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(width / 2) << "\" y=\"16\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        os << "<text x=\"" << fmt(left + (static_cast<double>(j) + 0.5) * cell) << "\" y=\"" << fmt(top - 6)
           << "\" text-anchor=\"middle\">" << escape(col_labels.at(static_cast<std::size_t>(j))) << "</text>\n";
    }
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        const double y = top + static_cast<double>(i) * cell;
        os << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(y + cell / 2 + 4) << "\" text-anchor=\"end\">"
           << escape(row_labels.at(static_cast<std::size_t>(i))) << "</text>\n";
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const double v = std::clamp(values(i, j), 0.0, 1.0);
            const double x = left + static_cast<double>(j) * cell;
            os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(cell) << "\" height=\""
               << fmt(cell) << "\" fill=\"" << ramp(v) << "\"/>";
            os << "<text x=\"" << fmt(x + cell / 2) << "\" y=\"" << fmt(y + cell / 2 + 4)
               << "\" text-anchor=\"middle\" fill=\"" << (v > 0.6 ? "black" : "white") << "\">" << fmt(v)
               << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace obscrl
