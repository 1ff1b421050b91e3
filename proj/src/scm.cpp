#include "obscrl/scm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "obscrl/errors.hpp"
#include "obscrl/rng.hpp"

namespace obscrl {

Scm::Scm(Dag dag, std::vector<Mechanism> mechanisms, Eigen::VectorXd noise_vars)
    : dag_(std::move(dag)), mechanisms_(std::move(mechanisms)), noise_vars_(std::move(noise_vars)) {
    const std::size_t n = dag_.size();
    if (mechanisms_.size() != n) throw StructuralError("one mechanism per node required");
    if (static_cast<std::size_t>(noise_vars_.size()) != n) throw StructuralError("one noise variance per node required");
    for (std::size_t i = 0; i < n; ++i) {
        if (mechanisms_[i].arity() != dag_.parents(i).size()) {
            throw StructuralError("mechanism arity of node " + std::to_string(i) + " does not match its parent count");
        }
        if (!(noise_vars_(static_cast<Eigen::Index>(i)) > 0.0) ||
            !std::isfinite(noise_vars_(static_cast<Eigen::Index>(i)))) {
            throw StructuralError("noise variance of node " + std::to_string(i) + " must be positive");
        }
    }
}

Scm Scm::squared_norm(Dag dag, Eigen::VectorXd noise_vars) {
    std::vector<Mechanism> mech;
    mech.reserve(dag.size());
    for (std::size_t i = 0; i < dag.size(); ++i) {
        mech.push_back(dag.is_root(i) ? Mechanism() : Mechanism::squared_norm(dag.parents(i).size()));
    }
    return Scm(std::move(dag), std::move(mech), std::move(noise_vars));
}

Eigen::VectorXd Scm::parent_values(std::size_t i, const Eigen::VectorXd& z) const {
    const NodeSet& pa = dag_.parents(i);
    Eigen::VectorXd out(static_cast<Eigen::Index>(pa.size()));
    for (std::size_t k = 0; k < pa.size(); ++k) out(static_cast<Eigen::Index>(k)) = z(static_cast<Eigen::Index>(pa[k]));
    return out;
}

Scm Scm::marginal(const NodeSet& keep) const {
    std::vector<char> kept(size(), 0);
    for (std::size_t k : keep) kept.at(k) = 1;
    for (std::size_t k : keep)
        for (std::size_t p : dag_.parents(k))
            if (!kept[p]) throw StructuralError("marginal: node set is not ancestrally closed");
    // Parent order is preserved by induced(), so mechanisms carry over unchanged.
    Dag sub = dag_.induced(keep);
    std::vector<Mechanism> mech;
    Eigen::VectorXd vars(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        mech.push_back(mechanisms_[keep[k]]);
        vars(static_cast<Eigen::Index>(k)) = noise_vars_(static_cast<Eigen::Index>(keep[k]));
    }
    return Scm(std::move(sub), std::move(mech), std::move(vars));
}

nlohmann::json Scm::to_json() const {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [u, v] : dag_.edges()) edges.push_back({u, v});
    nlohmann::json mech = nlohmann::json::array();
    for (const auto& m : mechanisms_) mech.push_back(m.to_json());
    return {{"n", size()},
            {"edges", edges},
            {"mechanisms", mech},
            {"noise_vars", std::vector<double>(noise_vars_.data(), noise_vars_.data() + noise_vars_.size())}};
}

Scm Scm::from_json(const nlohmann::json& j) {
    try {
        const auto n = j.at("n").get<std::size_t>();
        // Parent order within a node follows edge order in the document.
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
        Dag dag = Dag::from_edges(n, edges);

        std::vector<Mechanism> mech;
        if (j.contains("mechanisms")) {
            const auto& arr = j.at("mechanisms");
            if (arr.size() != n) throw StructuralError("\"mechanisms\" must have n entries");
            for (std::size_t i = 0; i < n; ++i) mech.push_back(Mechanism::from_json(arr[i], dag.parents(i).size()));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                mech.push_back(dag.is_root(i) ? Mechanism() : Mechanism::squared_norm(dag.parents(i).size()));
        }
        auto vars = j.at("noise_vars").get<std::vector<double>>();
        Eigen::VectorXd nv = Eigen::Map<Eigen::VectorXd>(vars.data(), static_cast<Eigen::Index>(vars.size()));
        return Scm(std::move(dag), std::move(mech), std::move(nv));
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed SCM JSON: ") + e.what());
    }
}

void Scm::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

Scm Scm::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

Dag random_dag(std::size_t n, double edge_prob, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "random_dag");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates with the portable uniform.
    for (std::size_t i = n; i > 1; --i) {
        auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    std::vector<NodeSet> pa(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (rng.uniform() < edge_prob) pa[order[b]].push_back(order[a]);
    return Dag(n, std::move(pa));
}

}  // namespace obscrl
