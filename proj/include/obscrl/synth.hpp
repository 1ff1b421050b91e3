#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "obscrl/scm.hpp"

namespace obscrl {

// Full-column-rank d x n mixing matrix with its cached Moore-Penrose inverse.
class MixingMatrix {
public:
    // Throws NumericError unless sigma_min > 1e-9 * sigma_max.
    explicit MixingMatrix(Eigen::MatrixXd h);

    static MixingMatrix identity(Eigen::Index n) { return MixingMatrix(Eigen::MatrixXd::Identity(n, n)); }

    const Eigen::MatrixXd& matrix() const noexcept { return h_; }
    const Eigen::MatrixXd& pinv() const noexcept { return pinv_; }
    Eigen::Index rows() const noexcept { return h_.rows(); }
    Eigen::Index cols() const noexcept { return h_.cols(); }
    double condition_number() const noexcept { return cond_; }

private:
    Eigen::MatrixXd h_;
    Eigen::MatrixXd pinv_;
    double cond_ = 1.0;
};

// Per-column affine map applied by min-max scaling: scaled = scale * raw + offset.
struct ScaleInfo {
    Eigen::VectorXd scale;
    Eigen::VectorXd offset;
};

// Row m of every matrix is sample m.
struct SampleBatch {
    Eigen::MatrixXd E;  // N x n noise
    Eigen::MatrixXd Z;  // N x n latents
    Eigen::MatrixXd X;  // N x d observations (empty until mix())
    std::optional<ScaleInfo> scale_info;

    Eigen::Index samples() const noexcept { return Z.rows(); }
};

// E_i ~ N(0, sigma_i^2) from one stream per column; Z in topological order.
SampleBatch sample_scm(const Scm& scm, Eigen::Index samples, std::uint64_t seed);

// Model together with the latents it generated exactly.
struct ScaledSample {
    SampleBatch batch;
    Scm model;
};

// Min-max scales each latent onto [0, 1] as soon as it is generated, so children
// see scaled parents. E holds the unscaled noise; `model` is the equivalent
// additive-noise model of the scaled latents (mechanisms wrapped in affine maps,
// variances multiplied by scale^2), and scale_info records the per-node maps.
ScaledSample sample_scm_sequential(const Scm& scm, Eigen::Index samples, std::uint64_t seed);

// Uniform on [0.1, 1].
Eigen::VectorXd sample_noise_variances(std::size_t n, std::uint64_t seed);

// Affinely maps every Z column onto [0, 1]; E and X are untouched.
SampleBatch min_max_scale(SampleBatch batch);

// i.i.d. standard normal entries, redrawn (at most 100 times) until full column rank.
MixingMatrix sample_mixing(Eigen::Index d, Eigen::Index n, std::uint64_t seed);

// X = Z * H^T.
SampleBatch mix(SampleBatch batch, const MixingMatrix& h);

// beta = H^+ * H_hat relating estimated coordinates back to true latents.
Eigen::MatrixXd beta_matrix(const MixingMatrix& h, const Eigen::MatrixXd& h_hat);

}  // namespace obscrl
