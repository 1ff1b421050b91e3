#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "obscrl/graph.hpp"
#include "obscrl/mechanism.hpp"

namespace obscrl {

// Additive Gaussian noise model Z_i = f_i(Z_pa(i)) + E_i, E_i ~ N(0, noise_vars[i]).
class Scm {
public:
    Scm(Dag dag, std::vector<Mechanism> mechanisms, Eigen::VectorXd noise_vars);

    // Squared-norm mechanism at every non-root node, zero at roots.
    static Scm squared_norm(Dag dag, Eigen::VectorXd noise_vars);

    const Dag& dag() const noexcept { return dag_; }
    std::size_t size() const noexcept { return dag_.size(); }
    const Mechanism& mechanism(std::size_t i) const { return mechanisms_.at(i); }
    const std::vector<Mechanism>& mechanisms() const noexcept { return mechanisms_; }
    const Eigen::VectorXd& noise_vars() const noexcept { return noise_vars_; }

    // z restricted to pa(i), in parent-set order.
    Eigen::VectorXd parent_values(std::size_t i, const Eigen::VectorXd& z) const;

    // Marginal model of an ancestrally closed node set (sorted). Node k of the
    // result is keep[k]. Throws StructuralError if a kept node has a dropped parent.
    Scm marginal(const NodeSet& keep) const;

    // {"n", "edges", "mechanisms", "noise_vars"}
    nlohmann::json to_json() const;
    static Scm from_json(const nlohmann::json& j);

    void save(const std::filesystem::path& path) const;
    static Scm load(const std::filesystem::path& path);

private:
    Dag dag_;
    std::vector<Mechanism> mechanisms_;
    Eigen::VectorXd noise_vars_;
};

// Random DAG: each forward pair (i < j) of a random node order is an edge
// with probability edge_prob.
Dag random_dag(std::size_t n, double edge_prob, std::uint64_t seed);

}  // namespace obscrl
