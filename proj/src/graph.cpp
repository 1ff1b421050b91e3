#include "obscrl/graph.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "obscrl/errors.hpp"

namespace obscrl {

Dag::Dag(std::size_t n, std::vector<NodeSet> parent_sets) : parents_(std::move(parent_sets)), children_(n) {
    if (parents_.size() != n) {
        throw StructuralError("parent_sets has " + std::to_string(parents_.size()) + " entries, expected " +
                              std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        NodeSet sorted = parents_[i];
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw StructuralError("duplicate parent of node " + std::to_string(i));
        }
        for (std::size_t p : parents_[i]) {
            if (p >= n) throw StructuralError("parent index " + std::to_string(p) + " out of range");
            if (p == i) throw StructuralError("self loop at node " + std::to_string(i));
            children_[p].push_back(i);
        }
    }

    // Kahn's algorithm; smallest ready index first so the order is canonical.
    std::vector<std::size_t> indegree(n);
    for (std::size_t i = 0; i < n; ++i) indegree[i] = parents_[i].size();
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    order_.reserve(n);
    while (!ready.empty()) {
        auto it = std::min_element(ready.begin(), ready.end());
        std::size_t v = *it;
        ready.erase(it);
        order_.push_back(v);
        for (std::size_t c : children_[v])
            if (--indegree[c] == 0) ready.push_back(c);
    }
    if (order_.size() != n) throw StructuralError("graph contains a directed cycle");
}

Dag Dag::from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<NodeSet> pa(n);
    for (auto [u, v] : edges) {
        if (u >= n || v >= n) throw StructuralError("edge endpoint out of range");
        pa[v].push_back(u);
    }
    return Dag(n, std::move(pa));
}

const NodeSet& Dag::parents(std::size_t i) const {
    if (i >= size()) throw StructuralError("node index " + std::to_string(i) + " out of range");
    return parents_[i];
}

const NodeSet& Dag::children(std::size_t i) const {
    if (i >= size()) throw StructuralError("node index " + std::to_string(i) + " out of range");
    return children_[i];
}

std::vector<std::pair<std::size_t, std::size_t>> Dag::edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t v = 0; v < size(); ++v)
        for (std::size_t u : parents_[v]) out.emplace_back(u, v);
    return out;
}

NodeSet Dag::leaves() const {
    NodeSet out;
    for (std::size_t i = 0; i < size(); ++i)
        if (children_[i].empty()) out.push_back(i);
    return out;
}

Dag Dag::induced(const NodeSet& keep) const {
    std::vector<long> index(size(), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        if (keep[k] >= size()) throw StructuralError("induced: node out of range");
        index[keep[k]] = static_cast<long>(k);
    }
    std::vector<NodeSet> pa(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k)
        for (std::size_t p : parents_[keep[k]])
            if (index[p] >= 0) pa[k].push_back(static_cast<std::size_t>(index[p]));
    return Dag(keep.size(), std::move(pa));
}

Dag Dag::relabeled(const std::vector<std::size_t>& perm) const {
    if (perm.size() != size()) throw StructuralError("relabel: permutation size mismatch");
    std::vector<NodeSet> pa(size());
    for (std::size_t i = 0; i < size(); ++i) {
        NodeSet& dst = pa.at(perm[i]);
        for (std::size_t p : parents_[i]) dst.push_back(perm.at(p));
    }
    return Dag(size(), std::move(pa));
}

namespace {

NodeSet reach(const Dag& dag, std::size_t start, bool downward) {
    std::vector<char> seen(dag.size(), 0);
    std::deque<std::size_t> queue{start};
    NodeSet out;
    while (!queue.empty()) {
        std::size_t v = queue.front();
        queue.pop_front();
        const NodeSet& next = downward ? dag.children(v) : dag.parents(v);
        for (std::size_t w : next) {
            if (seen[w]) continue;
            seen[w] = 1;
            out.push_back(w);
            queue.push_back(w);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

Relatives relatives(const Dag& dag, std::size_t i) {
    Relatives r;
    r.children = dag.children(i);
    std::sort(r.children.begin(), r.children.end());
    r.ancestors = reach(dag, i, false);
    r.descendants = reach(dag, i, true);
    return r;
}

NodeSet LayerAssignment::nodes_in(std::size_t k) const {
    NodeSet out;
    for (std::size_t i = 0; i < layer.size(); ++i)
        if (layer[i] == k) out.push_back(i);
    return out;
}

LayerAssignment layers(const Dag& dag) {
    LayerAssignment out;
    out.layer.assign(dag.size(), 0);
    const NodeSet& order = dag.topological_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        std::size_t v = *it;
        for (std::size_t c : dag.children(v)) out.layer[v] = std::max(out.layer[v], out.layer[c] + 1);
        out.max_layer = std::max(out.max_layer, out.layer[v]);
    }
    return out;
}

Dag line_graph(std::size_t n) {
    std::vector<NodeSet> pa(n);
    for (std::size_t i = 1; i < n; ++i) pa[i] = {i - 1};
    return Dag(n, std::move(pa));
}

Dag y_structure() { return Dag(4, {{}, {0}, {1}, {1}}); }

}  // namespace obscrl
