#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obscrl/jacobian_batch.hpp"

namespace obscrl {

struct SolverTraceEntry {
    std::size_t restart = 0;
    std::size_t iterations = 0;
    double objective = 0.0;
    double residual = 0.0;
};

std::string to_json_line(const SolverTraceEntry& e);

struct SolverConfig {
    double tol = 1e-3;  // feasibility threshold on max_m |h^T J_m h|
    std::size_t restarts = 32;
    std::size_t max_iters = 500;  // projected-gradient iterations per restart
    double armijo = 1e-4;         // sufficient-decrease constant
    double backtrack = 0.5;       // step shrink factor
    std::size_t max_backtracks = 60;
    std::size_t polish_iters = 50;  // Gauss-Newton refinement steps per restart
    double prune_fraction = 0.25;   // used by auto-tolerance mode
    bool auto_tol = false;
    std::uint64_t seed = 0;
    std::function<void(const SolverTraceEntry&)> trace;

    // Throws StructuralError when a field is out of range.
    void validate() const;
};

struct NullDirectionResult {
    std::optional<Eigen::VectorXd> h;  // unit vector orthogonal to every constraint
    double residual = 0.0;             // max_m |h^T J_m h|
    double objective = 0.0;            // (1/N) sum_m (h^T J_m h)^2
    bool feasible = false;
    std::size_t restart = 0;  // restart that produced h
};

// Searches the unit sphere, restricted to the orthogonal complement of `ortho`,
// for h with h^T J_m h = 0 for every centered Jacobian J_m. Minimizes the mean
// squared quadratic form by projected gradient with backtracking over seeded
// restarts, then refines each restart with damped Gauss-Newton. Among feasible
// candidates the lowest objective wins; otherwise the lowest-objective
// candidate is returned with feasible = false.
NullDirectionResult find_null_direction(const JacobianBatch& batch, const std::vector<Eigen::VectorXd>& ortho,
                                        const SolverConfig& cfg);

// Smallest max_m |v^T J_m v| found over the restarts (same search as above).
double min_feasibility_level(const JacobianBatch& batch, const std::vector<Eigen::VectorXd>& ortho,
                             const SolverConfig& cfg);

// Drops the ceil(fraction * N) centered matrices of largest Frobenius norm and re-centers.
JacobianBatch prune_outliers(const JacobianBatch& batch, double fraction);

// min_feasibility_level(batch, ortho, cfg) + 0.001
double auto_tolerance(const JacobianBatch& batch, const std::vector<Eigen::VectorXd>& ortho, const SolverConfig& cfg);

// (1/N) sum_m (v^T J~_m v)^2 over the centered matrices.
double centered_quartic_mean(const JacobianBatch& batch, const Eigen::VectorXd& v);

}  // namespace obscrl
