#include "obscrl/synth.hpp"

#include <cmath>

#include "obscrl/errors.hpp"
#include "obscrl/rng.hpp"

namespace obscrl {

MixingMatrix::MixingMatrix(Eigen::MatrixXd h) : h_(std::move(h)) {
    if (h_.rows() < h_.cols() || h_.cols() == 0) throw DimensionError("mixing matrix must be d x n with d >= n >= 1");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (!(smin > 1e-9 * smax)) throw NumericError("mixing matrix is not full column rank");
    cond_ = smax / smin;
    pinv_ = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

SampleBatch sample_scm(const Scm& scm, Eigen::Index samples, std::uint64_t seed) {
    if (samples < 1) throw DimensionError("sample_scm needs at least one sample");
    const auto n = static_cast<Eigen::Index>(scm.size());
    SampleBatch batch;
    batch.E.resize(samples, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, "noise", static_cast<std::uint64_t>(i));
        const double sd = std::sqrt(scm.noise_vars()(i));
        for (Eigen::Index m = 0; m < samples; ++m) batch.E(m, i) = sd * rng.normal();
    }
    batch.Z.resize(samples, n);
    Eigen::VectorXd z(n);
    for (Eigen::Index m = 0; m < samples; ++m) {
        for (std::size_t i : scm.dag().topological_order()) {
            const auto ii = static_cast<Eigen::Index>(i);
            z(ii) = scm.mechanism(i).evaluate(scm.parent_values(i, z)) + batch.E(m, ii);
        }
        batch.Z.row(m) = z.transpose();
    }
    return batch;
}

ScaledSample sample_scm_sequential(const Scm& scm, Eigen::Index samples, std::uint64_t seed) {
    if (samples < 2) throw DimensionError("sample_scm_sequential needs at least two samples");
    const auto n = static_cast<Eigen::Index>(scm.size());
    // Same noise streams as sample_scm.
    SampleBatch batch = sample_scm(scm, 1, seed);
    batch.E.resize(samples, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, "noise", static_cast<std::uint64_t>(i));
        const double sd = std::sqrt(scm.noise_vars()(i));
        for (Eigen::Index m = 0; m < samples; ++m) batch.E(m, i) = sd * rng.normal();
    }
    batch.Z.resize(samples, n);
    ScaleInfo info{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    std::vector<Mechanism> mech(scm.size());
    Eigen::VectorXd vars(n);
    for (std::size_t i : scm.dag().topological_order()) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (Eigen::Index m = 0; m < samples; ++m) {
            const Eigen::VectorXd z = batch.Z.row(m).transpose();
            batch.Z(m, ii) = scm.mechanism(i).evaluate(scm.parent_values(i, z)) + batch.E(m, ii);
        }
        const double lo = batch.Z.col(ii).minCoeff();
        const double hi = batch.Z.col(ii).maxCoeff();
        if (!(hi > lo)) throw DegenerateError("sample_scm_sequential: node " + std::to_string(i) + " is constant");
        const double a = 1.0 / (hi - lo);
        const double b = -lo / (hi - lo);
        batch.Z.col(ii) = (a * batch.Z.col(ii).array() + b).matrix();
        info.scale(ii) = a;
        info.offset(ii) = b;
        const std::size_t arity = scm.dag().parents(i).size();
        if (arity == 0) {
            mech[i] = Mechanism::constant(a * scm.mechanism(i).evaluate(Eigen::VectorXd(0)) + b);
        } else {
            mech[i] = Mechanism::affine(scm.mechanism(i), a, b, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(arity)),
                                        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arity)));
        }
        vars(ii) = a * a * scm.noise_vars()(ii);
    }
    batch.scale_info = std::move(info);
    return {std::move(batch), Scm(scm.dag(), std::move(mech), std::move(vars))};
}

Eigen::VectorXd sample_noise_variances(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw DimensionError("sample_noise_variances needs n >= 1");
    Rng rng = Rng::stream(seed, "noise_vars");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(0.1, 1.0);
    return v;
}

SampleBatch min_max_scale(SampleBatch batch) {
    const Eigen::Index n = batch.Z.cols();
    ScaleInfo info{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        const double lo = batch.Z.col(j).minCoeff();
        const double hi = batch.Z.col(j).maxCoeff();
        if (!(hi > lo)) throw DegenerateError("min_max_scale: column " + std::to_string(j) + " is constant");
        info.scale(j) = 1.0 / (hi - lo);
        info.offset(j) = -lo / (hi - lo);
        batch.Z.col(j) = ((batch.Z.col(j).array() - lo) / (hi - lo)).min(1.0).max(0.0).matrix();
    }
    batch.scale_info = std::move(info);
    return batch;
}

MixingMatrix sample_mixing(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
    if (d < n || n < 1) throw DimensionError("sample_mixing requires d >= n >= 1");
    Rng rng = Rng::stream(seed, "mixing");
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::MatrixXd h = rng.normal_matrix(d, n);
        try {
            return MixingMatrix(std::move(h));
        } catch (const NumericError&) {
        }
    }
    throw NumericError("sample_mixing: no full-rank draw in 100 attempts");
}

SampleBatch mix(SampleBatch batch, const MixingMatrix& h) {
    if (batch.Z.cols() != h.cols()) {
        throw DimensionError("mix: Z has " + std::to_string(batch.Z.cols()) + " columns but H has " +
                             std::to_string(h.cols()));
    }
    batch.X = batch.Z * h.matrix().transpose();
    return batch;
}

Eigen::MatrixXd beta_matrix(const MixingMatrix& h, const Eigen::MatrixXd& h_hat) {
    if (h_hat.rows() != h.rows()) throw DimensionError("beta_matrix: H_hat row count differs from d");
    return h.pinv() * h_hat;
}

}  // namespace obscrl
