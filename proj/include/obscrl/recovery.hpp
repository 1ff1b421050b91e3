#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "obscrl/errors.hpp"
#include "obscrl/jacobian_batch.hpp"
#include "obscrl/regression.hpp"
#include "obscrl/scm.hpp"
#include "obscrl/sphere_solver.hpp"
#include "obscrl/stein.hpp"
#include "obscrl/synth.hpp"

namespace obscrl {

// What a provider sees at the start of a round: the current coordinates
// X_hat = X W^T (N x k) and the functionals W (k x d) that produced them.
struct RoundInput {
    std::size_t round = 0;
    const Eigen::MatrixXd& W;
    const Eigen::MatrixXd& X_hat;
};

// Supplies score Jacobians of the current coordinates, one k x k matrix per sample.
class JacobianProvider {
public:
    virtual ~JacobianProvider() = default;
    virtual JacobianBatch jacobians(const RoundInput& in) = 0;
    // Exact Jacobians: coordinates are classified by the variance test.
    virtual bool exact() const { return false; }
    virtual std::string name() const = 0;
};

// Ancestrally closed node set of size k with the largest total `energy`
// (lexicographically first among ties).
NodeSet heaviest_closed_subset(const Dag& dag, const Eigen::VectorXd& energy, std::size_t k);

// Analytic Jacobians from the generating model. `scm` must describe the latents
// exactly as they were mixed (after any min-max scaling) and Z are those latents.
// Each round the current coordinates G Z (G = W H) are treated as functions of
// the heaviest ancestrally closed set of k latents, whose marginal model is exact.
class OracleProvider : public JacobianProvider {
public:
    OracleProvider(Scm scm, MixingMatrix h, Eigen::MatrixXd Z);
    JacobianBatch jacobians(const RoundInput& in) override;
    bool exact() const override { return true; }
    std::string name() const override { return "oracle"; }

private:
    Scm scm_;
    MixingMatrix h_;
    Eigen::MatrixXd z_;
};

// Kernel Stein estimates recomputed on the current coordinates every round.
class SteinProvider : public JacobianProvider {
public:
    explicit SteinProvider(SteinConfig cfg = {}) : cfg_(std::move(cfg)) {}
    JacobianBatch jacobians(const RoundInput& in) override;
    std::string name() const override { return "stein"; }

private:
    SteinConfig cfg_;
};

// A fixed observed-space batch (d x d) used for round 0; later rounds fall back
// to Stein estimates on the current coordinates.
class FixedBatchProvider : public JacobianProvider {
public:
    FixedBatchProvider(JacobianBatch observed, SteinConfig fallback = {}, bool exact = false);
    JacobianBatch jacobians(const RoundInput& in) override;
    bool exact() const override { return exact_; }
    std::string name() const override { return "external"; }

private:
    JacobianBatch observed_;
    SteinProvider fallback_;
    bool exact_;
};

struct RecoveryOptions {
    SolverConfig solver;
    double var_tol = 1e-8;              // absolute, on the pulled-back diagonal variances
    std::size_t latent_dim = 0;         // 0: number of columns of X
    std::size_t max_rounds = 64;
    std::uint64_t seed = 0;             // random fill columns and solver restarts
    bool whiten = true;                 // start from PCA-whitened coordinates; otherwise orthonormal PCA basis
};

struct RoundRecord {
    std::size_t round = 0;
    std::size_t dim = 0;
    double tol = 0.0;                    // feasibility threshold used by the solver
    double scale = 0.0;                  // RMS Frobenius norm of the centered batch
    std::vector<double> residuals;       // per solver-found column
    std::vector<double> variances;       // diagonal variances of the pulled-back batch
    std::vector<std::size_t> emitted;    // local indices emitted as this layer
    bool stalled = false;
};

struct HistoryEntry {
    Eigen::MatrixXd h_hat;               // k x k, orthonormal
    std::vector<bool> found;             // solver-found (true) or random fill (false)
};

struct RecoveryResult {
    Eigen::MatrixXd Z_hat;               // N x n, columns in emission order
    Eigen::MatrixXd functionals;         // n x d: Z_hat = X * functionals^T
    std::vector<std::size_t> layer_of;   // per Z_hat column
    std::vector<HistoryEntry> h_history;
    std::vector<RoundRecord> round_log;
    std::string provider;
    bool stalled = false;

    std::size_t layer_count() const;
    std::vector<std::size_t> coordinates_in(std::size_t layer) const;
    std::string status() const { return stalled ? "partial" : "complete"; }
    nlohmann::json log_json() const;
};

class StalledRecoveryError : public Error {
public:
    StalledRecoveryError(const std::string& what, RecoveryResult partial)
        : Error(what), partial_(std::move(partial)) {}
    const RecoveryResult& partial() const noexcept { return partial_; }

private:
    RecoveryResult partial_;
};

// Peels layers from the leaves up. Each round solves for unit directions with
// h^T J~_m h = 0 for all m, fills the rest of H_hat with seeded random columns,
// emits the zero-variance coordinates and continues on the others. A round that
// emits nothing ends the run: the remaining coordinates become a final layer and
// the result is marked stalled.
RecoveryResult recover_latents(const Eigen::MatrixXd& X, JacobianProvider& provider, const RecoveryOptions& opts);

// Round 0 from a given observed batch, Stein estimates afterwards.
RecoveryResult recover_latents(const JacobianBatch& observed, const Eigen::MatrixXd& X, const SolverConfig& cfg,
                               double var_tol);

// Same as recover_latents but throws StalledRecoveryError instead of returning a stalled result.
RecoveryResult recover_latents_strict(const Eigen::MatrixXd& X, JacobianProvider& provider,
                                      const RecoveryOptions& opts);

struct UpstreamReport {
    Eigen::MatrixXd loadings;            // n x n, row j = coordinate j on true Z, scaled to max |entry| = 1
    std::vector<double> max_violation;   // per coordinate: largest loading on true layers below its own
    double threshold = 0.05;
    bool ok = false;
    nlohmann::json to_json() const;
};

// Recovered layer-k coordinates may only load on true variables in layers >= k.
UpstreamReport check_upstream_structure(const RecoveryResult& result, const MixingMatrix& h,
                                        const std::vector<std::size_t>& true_layers, double threshold = 0.05);

struct RegressionRecord {
    std::size_t layer = 0;
    std::size_t inputs = 0;
    double bandwidth = 0.0;
    double ridge = 0.0;
};

struct NoiseResult {
    Eigen::MatrixXd E_hat;               // N x n, aligned with RecoveryResult::Z_hat
    std::vector<std::size_t> layer_of;
    std::vector<RegressionRecord> regression_models;
};

// Top layer: E_hat = Z_hat. Each lower layer: residual of kernel ridge
// regression of its Z_hat columns on every E_hat column of strictly higher layers.
NoiseResult recover_noise(const RecoveryResult& result, const RegressionConfig& cfg = {});

}  // namespace obscrl
