#include "obscrl/regression.hpp"

#include <cmath>

#include "obscrl/errors.hpp"
#include "obscrl/stein.hpp"

namespace obscrl {

KernelRidgeFit kernel_ridge(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const RegressionConfig& cfg) {
    const Eigen::Index n = targets.rows();
    if (inputs.rows() != n) throw DimensionError("kernel_ridge: inputs and targets differ in sample count");
    if (n < 2) throw DegenerateError("kernel_ridge needs at least two samples");
    if (!(cfg.ridge > 0.0)) throw DegenerateError("kernel_ridge: ridge must be positive");

    KernelRidgeFit out;
    out.inputs = inputs.cols();
    out.ridge = cfg.ridge;
    const Eigen::RowVectorXd mean_y = targets.colwise().mean();
    const Eigen::MatrixXd y = targets.rowwise() - mean_y;
    if (inputs.cols() == 0) {
        out.fitted = Eigen::MatrixXd::Zero(n, targets.cols()).rowwise() + mean_y;
        out.residuals = y;
        return out;
    }

    Eigen::MatrixXd x = inputs.rowwise() - inputs.colwise().mean();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double sd = std::sqrt(x.col(c).squaredNorm() / static_cast<double>(n));
        if (!(sd > 0.0)) throw DegenerateError("kernel_ridge: constant input column");
        x.col(c) /= sd;
    }
    out.bandwidth = cfg.bandwidth.value_or(median_bandwidth(x));
    if (!(out.bandwidth > 0.0)) throw DegenerateError("kernel_ridge: bandwidth must be positive");

    const double inv = 1.0 / (2.0 * out.bandwidth * out.bandwidth);
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = std::exp(-(x.row(i) - x.row(j)).squaredNorm() * inv);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    Eigen::MatrixXd a = k;
    a.diagonal().array() += cfg.ridge * static_cast<double>(n);
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("kernel_ridge: regularized Gram matrix is not positive definite");
    const Eigen::MatrixXd alpha = llt.solve(y);
    const Eigen::MatrixXd fit_centered = k * alpha;
    out.fitted = fit_centered.rowwise() + mean_y;
    out.residuals = y - fit_centered;
    return out;
}

}  // namespace obscrl
