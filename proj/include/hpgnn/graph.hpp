#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace hpgnn {

using NodeId = std::int32_t;

/// Immutable undirected graph: deduplicated edge list, CSR neighbor lists
/// sorted ascending, optional node features and class labels. Safe to share
/// across threads once built.
struct Graph {
    std::int64_t n = 0;
    std::vector<std::pair<NodeId, NodeId>> edges; // u < v, lexicographically sorted
    std::vector<std::int64_t> offsets;            // size n+1
    std::vector<NodeId> neighbors;
    Eigen::MatrixXd features;                     // n x F; 0 columns when absent
    std::vector<int> labels;                      // empty when absent
    std::vector<std::int64_t> original_ids;       // set when the loader remapped ids

    /// Builds CSR from a raw pair list: drops self-loops, deduplicates,
    /// symmetrizes. Node ids must lie in [0, n).
    static Graph from_edges(std::int64_t n, std::vector<std::pair<NodeId, NodeId>> raw_edges);

    std::int64_t num_nodes() const { return n; }
    std::int64_t num_undirected_edges() const { return static_cast<std::int64_t>(edges.size()); }
    std::int64_t num_edge_endpoints() const { return 2 * num_undirected_edges(); }

    std::int64_t degree(NodeId u) const { return offsets[u + 1] - offsets[u]; }

    std::span<const NodeId> neighbors_of(NodeId u) const {
        return {neighbors.data() + offsets[u], static_cast<std::size_t>(degree(u))};
    }

    bool has_features() const { return features.cols() > 0; }
    bool has_labels() const { return !labels.empty(); }
    std::int64_t num_features() const { return features.cols(); }
    int num_classes() const;

    /// Checks every structural invariant; throws InternalError on violation.
    void validate() const;
};

enum class NormMode {
    ColumnStochastic, // A D^-1; zero-degree columns stay zero
    Symmetric,        // entries A(u,v) / sqrt(d_u d_v)
};

/// Sparse normalization of a graph adjacency. `entries` keeps the sparsity
/// pattern of A; `degrees` are the base graph degrees.
struct NormalizedAdjacency {
    const Graph* base = nullptr;
    NormMode mode = NormMode::ColumnStochastic;
    Eigen::SparseMatrix<double> entries;
    std::vector<double> degrees;
};

NormalizedAdjacency normalize(const Graph& g, NormMode mode);

/// Mean over nodes of the same-label neighbor fraction. Zero-degree nodes are
/// excluded from the average. Throws MissingDataError when labels are absent.
double node_homophily(const Graph& g);

} // namespace hpgnn
