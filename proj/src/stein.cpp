#include "obscrl/stein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "obscrl/errors.hpp"

namespace obscrl {

namespace {

struct KernelFit {
    double bandwidth = 1.0;
    double ridge = 0.0;
    Eigen::MatrixXd scores;  // Stein estimates G, N x d
    Eigen::MatrixXd alpha;   // interpolant weights, N x d (empty unless requested)
};

double resolve_bandwidth(const Eigen::MatrixXd& X, const SteinConfig& cfg) {
    if (cfg.bandwidth) {
        if (!(*cfg.bandwidth > 0.0)) throw DegenerateError("Stein bandwidth must be positive");
        return *cfg.bandwidth;
    }
    return median_bandwidth(X);
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& X, double h) {
    const Eigen::Index n = X.rows();
    const double inv = 1.0 / (2.0 * h * h);
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = std::exp(-(X.row(i) - X.row(j)).squaredNorm() * inv);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

KernelFit fit(const Eigen::MatrixXd& X, const SteinConfig& cfg, bool want_alpha) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (n < 2) throw DegenerateError("Stein estimator needs at least two samples");
    KernelFit out;
    out.bandwidth = resolve_bandwidth(X, cfg);
    out.ridge = cfg.ridge.value_or(1e-3 * static_cast<double>(n));
    if (!(out.ridge > 0.0)) throw DegenerateError("Stein ridge must be positive");
    const double h2 = out.bandwidth * out.bandwidth;

    Eigen::MatrixXd a = gram(X, out.bandwidth);
    // <grad, K>_m = sum_m' grad_{x_m'} k(x_m, x_m') = sum_m' k_mm' (x_m - x_m') / h^2
    Eigen::MatrixXd grad_k = Eigen::MatrixXd::Zero(n, d);
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index q = 0; q < n; ++q) {
            if (q == m) continue;
            grad_k.row(m) += a(m, q) * (X.row(m) - X.row(q));
        }
    }
    grad_k /= h2;

    a.diagonal().array() += out.ridge;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("Stein: regularized Gram matrix is not positive definite");
    out.scores = -llt.solve(grad_k);
    if (!out.scores.allFinite()) throw NumericError("Stein: non-finite score estimates");
    if (want_alpha) out.alpha = llt.solve(out.scores);
    return out;
}

}  // namespace

double median_bandwidth(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    if (n < 2) throw DegenerateError("median_bandwidth needs at least two rows");
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((X.row(i) - X.row(j)).norm());
    const std::size_t mid = dist.size() / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double med = dist[mid];
    if (dist.size() % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }
    if (!(med > 0.0)) throw DegenerateError("median_bandwidth: median pairwise distance is zero");
    return med;
}

Eigen::MatrixXd stein_score(const Eigen::MatrixXd& X, const SteinConfig& cfg) { return fit(X, cfg, false).scores; }

std::vector<Eigen::MatrixXd> stein_jacobian_matrices(const Eigen::MatrixXd& X, const SteinConfig& cfg) {
    KernelFit f = fit(X, cfg, true);
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    const double inv = 1.0 / (2.0 * f.bandwidth * f.bandwidth);
    const double h2 = f.bandwidth * f.bandwidth;
    // J(x_m) = sum_m' grad_x k(x_m, x_m') alpha_m'^T, grad_x k(x, y) = -k(x, y) (x - y) / h^2
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(n));
    Eigen::VectorXd diff(d);
    for (Eigen::Index m = 0; m < n; ++m) {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(d, d);
        for (Eigen::Index q = 0; q < n; ++q) {
            if (q == m) continue;
            diff = (X.row(m) - X.row(q)).transpose();
            const double k = std::exp(-diff.squaredNorm() * inv);
            j.noalias() -= (k / h2) * diff * f.alpha.row(q);
        }
        if (cfg.symmetrize) j = (0.5 * (j + j.transpose())).eval();
        out.push_back(std::move(j));
    }
    return out;
}

JacobianBatch stein_jacobian(const Eigen::MatrixXd& X, const SteinConfig& cfg) {
    return center(JacobianBatch(stein_jacobian_matrices(X, cfg), SpaceTag::observed));
}

double jacobian_ser(const JacobianBatch& estimated, const JacobianBatch& oracle) {
    if (estimated.size() != oracle.size() || estimated.dim() != oracle.dim()) {
        throw DimensionError("jacobian_ser: batches differ in size or dimension");
    }
    double signal = 0.0;
    double error = 0.0;
    for (std::size_t m = 0; m < oracle.size(); ++m) {
        signal += oracle.raw(m).squaredNorm();
        error += (estimated.raw(m) - oracle.raw(m)).squaredNorm();
    }
    if (error == 0.0) return std::numeric_limits<double>::infinity();
    return signal / error;
}

}  // namespace obscrl
