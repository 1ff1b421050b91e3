#pragma once

#include <optional>

#include <Eigen/Dense>

namespace obscrl {

struct RegressionConfig {
    double ridge = 1e-3;              // lambda; the system solved is (K + lambda * N * I)
    std::optional<double> bandwidth;  // empty: median heuristic on the standardized inputs
};

struct KernelRidgeFit {
    double bandwidth = 0.0;
    double ridge = 0.0;
    Eigen::Index inputs = 0;
    Eigen::MatrixXd fitted;     // N x t
    Eigen::MatrixXd residuals;  // N x t, targets - fitted
};

// Kernel ridge regression of every column of `targets` (N x t) on the rows of
// `inputs` (N x q) with an RBF kernel. Input columns are z-scored first and the
// target mean is fitted as an unpenalized intercept. q = 0 fits the mean only.
KernelRidgeFit kernel_ridge(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                            const RegressionConfig& cfg = {});

}  // namespace obscrl
