#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace obscrl {

using NodeSet = std::vector<std::size_t>;

// Directed acyclic graph over nodes 0..n-1, stored as ordered parent sets.
class Dag {
public:
    Dag() = default;

    // Throws StructuralError on out-of-range/self parents or a cycle.
    Dag(std::size_t n, std::vector<NodeSet> parent_sets);

    static Dag from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

    std::size_t size() const noexcept { return parents_.size(); }
    const NodeSet& parents(std::size_t i) const;
    const NodeSet& children(std::size_t i) const;
    std::vector<std::pair<std::size_t, std::size_t>> edges() const;

    // Parents always precede children.
    const NodeSet& topological_order() const noexcept { return order_; }

    bool is_root(std::size_t i) const { return parents(i).empty(); }
    bool is_leaf(std::size_t i) const { return children(i).empty(); }
    NodeSet leaves() const;

    // Induced subgraph on `keep` (sorted); node k of the result is keep[k].
    Dag induced(const NodeSet& keep) const;

    // Relabels node i as perm[i].
    Dag relabeled(const std::vector<std::size_t>& perm) const;

private:
    std::vector<NodeSet> parents_;
    std::vector<NodeSet> children_;
    NodeSet order_;
};

struct Relatives {
    NodeSet children;
    NodeSet ancestors;
    NodeSet descendants;
};

Relatives relatives(const Dag& dag, std::size_t i);

struct LayerAssignment {
    std::vector<std::size_t> layer;  // longest directed path to a leaf
    std::size_t max_layer = 0;

    NodeSet nodes_in(std::size_t k) const;
};

LayerAssignment layers(const Dag& dag);

// Line graph 0 -> 1 -> ... -> n-1.
Dag line_graph(std::size_t n);

// 0 -> 1 -> 2, 1 -> 3.
Dag y_structure();

}  // namespace obscrl
