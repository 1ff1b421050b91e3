#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "obscrl/jacobian_batch.hpp"
#include "obscrl/recovery.hpp"

namespace obscrl {

// |Pearson correlation| between column i of a and column j of b (N x n each).
// Throws DegenerateError on a constant column.
Eigen::MatrixXd abs_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Maximum-weight perfect assignment on a square matrix: result[i] is the column matched to row i.
std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& weight);

struct EvalReport {
    double mac = 0.0;
    std::vector<std::size_t> matching;  // true coordinate i <-> estimated coordinate matching[i]
    Eigen::MatrixXd corr_matrix;        // rows: true, columns: estimated
    std::optional<double> ser;
    std::optional<UpstreamReport> beta_report;

    nlohmann::json to_json() const;
};

EvalReport mac(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

// Adds i.i.d. symmetric Gaussian noise scaled so that jacobian_ser(result, batch)
// equals target_ser, then re-centers. Tag is preserved.
JacobianBatch perturb_jacobians(const JacobianBatch& batch, double target_ser, std::uint64_t seed);

// Oracle Jacobians perturbed to a fixed SER every round.
class PerturbedProvider : public JacobianProvider {
public:
    PerturbedProvider(OracleProvider oracle, double target_ser, std::uint64_t seed);
    JacobianBatch jacobians(const RoundInput& in) override;
    std::string name() const override { return "perturbed"; }
    // Measured SER of each round's batch.
    const std::vector<double>& measured_ser() const noexcept { return measured_; }

private:
    OracleProvider oracle_;
    double target_;
    std::uint64_t seed_;
    std::vector<double> measured_;
};

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace obscrl
