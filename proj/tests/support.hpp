#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "obscrl/rng.hpp"
#include "obscrl/scm.hpp"
#include "obscrl/synth.hpp"

namespace testing {

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x, b = x;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd j(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x, b = x;
        a(i) += h;
        b(i) -= h;
        j.col(i) = (f(a) - f(b)) / (2 * h);
    }
    return j;
}

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
    return (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
}

inline obscrl::Scm random_scm(std::size_t n, std::uint64_t seed, double edge_prob = 0.5) {
    return obscrl::Scm::squared_norm(obscrl::random_dag(n, edge_prob, seed), obscrl::sample_noise_variances(n, seed));
}

inline Eigen::VectorXd random_point(Eigen::Index n, obscrl::Rng& rng, double box = 1.0) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.uniform(-box, box);
    return z;
}

}  // namespace testing

#include "obscrl/jacobian_batch.hpp"

namespace testing {

// Certified lower bound on min over unit v of max_m |v^T J_m v| for the centered
// matrices: a hyperspherical grid with `steps` points per polar angle, minus
// the Lipschitz slack 2 max_m |J_m|_2 times the grid covering radius.
inline double certified_min_max(const obscrl::JacobianBatch& batch, int steps) {
    const Eigen::Index d = batch.dim();
    const auto angles = static_cast<int>(d - 1);
    double lip = 0.0;
    for (const auto& j : batch.centered()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j, Eigen::EigenvaluesOnly);
        lip = std::max(lip, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    const double delta = M_PI / steps;
    std::vector<int> idx(static_cast<std::size_t>(angles), 0);
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd v(d);
    for (;;) {
        double s = 1.0;
        for (int k = 0; k < angles; ++k) {
            const double th = delta * idx[static_cast<std::size_t>(k)];
            v(k) = s * std::cos(th);
            s *= std::sin(th);
        }
        v(d - 1) = s;
        double worst = 0.0;
        for (const auto& j : batch.centered()) worst = std::max(worst, std::abs(v.dot(j * v)));
        best = std::min(best, worst);
        int k = 0;
        // The last angle covers a half circle as well: v and -v are equivalent.
        while (k < angles && ++idx[static_cast<std::size_t>(k)] > steps) idx[static_cast<std::size_t>(k++)] = 0;
        if (k == angles) break;
    }
    return best - 2.0 * lip * 0.5 * delta * std::sqrt(static_cast<double>(angles));
}

inline obscrl::JacobianBatch random_symmetric_batch(Eigen::Index d, int n, std::uint64_t seed) {
    obscrl::Rng rng(seed);
    std::vector<Eigen::MatrixXd> raw;
    for (int m = 0; m < n; ++m) {
        const Eigen::MatrixXd a = rng.normal_matrix(d, d);
        raw.push_back((a + a.transpose()) / 2.0);
    }
    return obscrl::center(obscrl::JacobianBatch(raw, obscrl::SpaceTag::observed));
}

// Centered matrices sharing exactly one null direction e: J_m = sum_k c_mk q_k q_k^T over
// an orthonormal basis {q_k} of the complement of e.
inline obscrl::JacobianBatch common_null_batch(const Eigen::VectorXd& e, int n, std::uint64_t seed) {
    obscrl::Rng rng(seed);
    const Eigen::Index d = e.size();
    Eigen::MatrixXd basis(d, d);
    basis.col(0) = e.normalized();
    basis.rightCols(d - 1) = rng.normal_matrix(d, d - 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    const Eigen::MatrixXd q = qr.householderQ();
    std::vector<Eigen::MatrixXd> raw;
    for (int m = 0; m < n; ++m) {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(d, d);
        for (Eigen::Index k = 1; k < d; ++k) j += rng.normal() * q.col(k) * q.col(k).transpose();
        raw.push_back(j);
    }
    return obscrl::center(obscrl::JacobianBatch(raw, obscrl::SpaceTag::observed));
}

}  // namespace testing
