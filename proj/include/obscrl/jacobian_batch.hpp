#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace obscrl {

enum class SpaceTag : std::uint32_t { latent = 0, observed = 1, estimated_latent = 2 };

std::string to_string(SpaceTag tag);
SpaceTag space_tag_from_string(const std::string& s);

// Per-sample symmetric score-Jacobian matrices. Raw matrices are symmetrized
// as (J + J^T) / 2 on construction; mean and centered forms are filled by center().
class JacobianBatch {
public:
    JacobianBatch() = default;
    JacobianBatch(std::vector<Eigen::MatrixXd> raw, SpaceTag tag);

    std::size_t size() const noexcept { return raw_.size(); }
    Eigen::Index dim() const noexcept { return raw_.empty() ? 0 : raw_.front().rows(); }
    SpaceTag tag() const noexcept { return tag_; }
    bool is_centered() const noexcept { return !centered_.empty(); }

    const std::vector<Eigen::MatrixXd>& raw() const noexcept { return raw_; }
    const Eigen::MatrixXd& raw(std::size_t m) const { return raw_.at(m); }
    // Throw std::logic_error when the batch has not been centered.
    const Eigen::MatrixXd& mean() const;
    const std::vector<Eigen::MatrixXd>& centered() const;
    const Eigen::MatrixXd& centered(std::size_t m) const;

    // Keeps the listed samples (in order) and re-centers if this batch was centered.
    JacobianBatch select(const std::vector<std::size_t>& samples) const;
    JacobianBatch scaled(double factor) const;
    JacobianBatch with_tag(SpaceTag tag) const;

    friend JacobianBatch center(JacobianBatch batch);

private:
    std::vector<Eigen::MatrixXd> raw_;
    Eigen::MatrixXd mean_;
    std::vector<Eigen::MatrixXd> centered_;
    SpaceTag tag_ = SpaceTag::observed;
};

// Fills mean = (1/N) sum J and centered_m = J_m - mean. Needs N >= 2.
JacobianBatch center(JacobianBatch batch);

// Per-sample congruence H_hat^T J_m H_hat (H_hat is dim x k); tagged
// estimated-latent and centered when the input was.
JacobianBatch pull_back(const JacobianBatch& batch, const Eigen::MatrixXd& h_hat);

// entry i = (1/N) sum_m (centered_m)_ii^2
Eigen::VectorXd diag_variance(const JacobianBatch& batch);

// Root-mean-square Frobenius norm of the centered matrices.
double rms_centered_norm(const JacobianBatch& batch);

// Binary layout, little-endian: "OCJB", u32 version (1), u32 space tag,
// u64 N, u64 d, then N row-major d x d float64 matrices (raw form).
void write_jacobians(const std::filesystem::path& path, const JacobianBatch& batch);
JacobianBatch read_jacobians(const std::filesystem::path& path);

void write_diag_variance_csv(const std::filesystem::path& path, const Eigen::VectorXd& variances);

}  // namespace obscrl
