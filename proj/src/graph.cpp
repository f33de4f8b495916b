#include "hpgnn/graph.hpp"
#include "hpgnn/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hpgnn {

Graph Graph::from_edges(std::int64_t n, std::vector<std::pair<NodeId, NodeId>> raw_edges) {
    if (n < 0) throw InvalidArgumentError("node count must be nonnegative");
    Graph g;
    g.n = n;

    for (auto& [u, v] : raw_edges) {
        if (u < 0 || v < 0 || u >= n || v >= n)
            throw BoundsError("edge endpoint out of range [0, " + std::to_string(n) + ")");
        if (u > v) std::swap(u, v);
    }
    std::erase_if(raw_edges, [](const auto& e) { return e.first == e.second; });
    std::sort(raw_edges.begin(), raw_edges.end());
    raw_edges.erase(std::unique(raw_edges.begin(), raw_edges.end()), raw_edges.end());
    g.edges = std::move(raw_edges);

    std::vector<std::int64_t> deg(static_cast<std::size_t>(n), 0);
    for (const auto& [u, v] : g.edges) {
        ++deg[u];
        ++deg[v];
    }
    g.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::int64_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + deg[i];
    g.neighbors.resize(static_cast<std::size_t>(g.offsets[n]));
    std::vector<std::int64_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (const auto& [u, v] : g.edges) {
        g.neighbors[cursor[u]++] = v;
        g.neighbors[cursor[v]++] = u;
    }
    // Edge list is lexicographically sorted, so each CSR row comes out sorted
    // for the second endpoints but not the first; sort per row.
    for (std::int64_t u = 0; u < n; ++u)
        std::sort(g.neighbors.begin() + g.offsets[u], g.neighbors.begin() + g.offsets[u + 1]);
    return g;
}

int Graph::num_classes() const {
    int c = 0;
    for (int y : labels) {
        if (y < 0) throw InvalidArgumentError("negative class id");
        c = std::max(c, y + 1);
    }
    return c;
}

void Graph::validate() const {
    if (static_cast<std::int64_t>(offsets.size()) != n + 1)
        throw InternalError("offsets size mismatch");
    for (const auto& [u, v] : edges)
        if (u >= v) throw InternalError("edge list not strictly increasing pairs");
    if (!std::is_sorted(edges.begin(), edges.end()))
        throw InternalError("edge list not sorted");
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw InternalError("duplicate edge");
    std::int64_t endpoint_total = 0;
    for (NodeId u = 0; u < n; ++u) {
        auto nb = neighbors_of(u);
        endpoint_total += static_cast<std::int64_t>(nb.size());
        if (!std::is_sorted(nb.begin(), nb.end()))
            throw InternalError("neighbor list not sorted");
        for (NodeId v : nb) {
            if (v == u) throw InternalError("self loop in adjacency");
            auto back = neighbors_of(v);
            if (!std::binary_search(back.begin(), back.end(), u))
                throw InternalError("adjacency not symmetric");
        }
    }
    if (endpoint_total != num_edge_endpoints())
        throw InternalError("degree sum does not match edge count");
    if (has_features() && features.rows() != n)
        throw InternalError("feature row count mismatch");
    if (has_labels() && static_cast<std::int64_t>(labels.size()) != n)
        throw InternalError("label count mismatch");
}

NormalizedAdjacency normalize(const Graph& g, NormMode mode) {
    NormalizedAdjacency result;
    result.base = &g;
    result.mode = mode;
    result.degrees.resize(static_cast<std::size_t>(g.n));
    for (NodeId u = 0; u < g.n; ++u) result.degrees[u] = static_cast<double>(g.degree(u));

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(g.num_edge_endpoints()));
    for (NodeId v = 0; v < g.n; ++v) {
        for (NodeId u : g.neighbors_of(v)) {
            double value = mode == NormMode::ColumnStochastic
                               ? 1.0 / result.degrees[v]
                               : 1.0 / std::sqrt(result.degrees[u] * result.degrees[v]);
            triplets.emplace_back(u, v, value);
        }
    }
    Eigen::SparseMatrix<double> m(g.n, g.n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    result.entries = std::move(m);
    return result;
}

double node_homophily(const Graph& g) {
    if (!g.has_labels()) throw MissingDataError("node_homophily requires labels");
    double total = 0;
    std::int64_t counted = 0;
    for (NodeId v = 0; v < g.n; ++v) {
        auto nb = g.neighbors_of(v);
        if (nb.empty()) continue;
        std::int64_t same = 0;
        for (NodeId u : nb)
            if (g.labels[u] == g.labels[v]) ++same;
        total += static_cast<double>(same) / static_cast<double>(nb.size());
        ++counted;
    }
    return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

} // namespace hpgnn
