#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "obscrl/jacobian_batch.hpp"

namespace obscrl {

struct SteinConfig {
    std::optional<double> bandwidth;  // empty: median heuristic
    std::optional<double> ridge;      // empty: 1e-3 * N
    bool symmetrize = true;
};

// Median of the N(N-1)/2 pairwise Euclidean distances between rows of X.
double median_bandwidth(const Eigen::MatrixXd& X);

// Kernel Stein score estimates at the rows of X (N x d), RBF kernel
// k(x, y) = exp(-|x - y|^2 / (2 h^2)):  G = -(K + eta I)^{-1} <grad, K>.
Eigen::MatrixXd stein_score(const Eigen::MatrixXd& X, const SteinConfig& cfg = {});

// Per-sample Jacobian of the kernel interpolant s(x) = sum_m alpha_m k(x, x_m)
// fitted to the Stein scores with the same ridge. Symmetrized iff cfg.symmetrize.
std::vector<Eigen::MatrixXd> stein_jacobian_matrices(const Eigen::MatrixXd& X, const SteinConfig& cfg = {});

// Same estimates as a batch (always symmetric); observed tag, centered.
JacobianBatch stein_jacobian(const Eigen::MatrixXd& X, const SteinConfig& cfg = {});

// sum_m |J_oracle|_F^2 / sum_m |J_est - J_oracle|_F^2 over raw matrices;
// +infinity when the two batches are identical.
double jacobian_ser(const JacobianBatch& estimated, const JacobianBatch& oracle);

}  // namespace obscrl
