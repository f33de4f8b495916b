#pragma once

#include "hpgnn/graph.hpp"

#include <filesystem>
#include <map>

namespace hpgnn {

/// Clique complex of a graph up to a maximum order: every (p+1)-clique is kept
/// as a p-simplex. Order-1 simplices are the graph's edges. Simplex tuples are
/// strictly increasing and each per-order list is lexicographically sorted, so
/// the structure is canonical for a given graph.
struct SimplicialComplex {
    int max_order = 1;
    std::int64_t n = 0;
    /// flat[p] holds simplex_count(p) tuples of length p+1; index 0 unused.
    std::vector<std::vector<NodeId>> flat;

    std::int64_t simplex_count(int p) const {
        if (p < 1 || p > max_order) return 0;
        return static_cast<std::int64_t>(flat[p].size()) / (p + 1);
    }

    std::span<const NodeId> simplex(int p, std::int64_t i) const {
        return {flat[p].data() + i * (p + 1), static_cast<std::size_t>(p + 1)};
    }

    /// Node-to-simplex incidence B_p (n x m_p), one column per simplex with
    /// p+1 unit entries. Built on demand.
    Eigen::SparseMatrix<double> incidence(int p) const;
};

inline constexpr std::int64_t kDefaultSimplexCap = 100'000'000;

/// Exact enumeration of all cliques of size 2..max_order+1 by
/// neighborhood-intersection expansion over the sorted adjacency lists.
/// Throws BoundsError if any order exceeds `cap` simplices.
SimplicialComplex enumerate_cliques(const Graph& g, int max_order,
                                    std::int64_t cap = kDefaultSimplexCap);

/// Node-level co-membership operator at order p: counts(u,v) = number of
/// p-simplices containing both u and v, zero diagonal. `normalized` is the
/// column-stochastic scaling with zero-sum columns left zero.
struct HigherOrderAdjacency {
    int order = 1;
    Eigen::SparseMatrix<double> counts;
    Eigen::SparseMatrix<double> normalized;
    std::vector<double> degrees; // column sums of counts
    std::int64_t simplex_count = 0;
};

HigherOrderAdjacency higher_adjacency(const SimplicialComplex& sc, int p, bool binarize = false);

struct ComplexStats {
    std::int64_t n = 0;
    int max_order = 1;
    std::vector<std::int64_t> counts;                         // counts[p], index 0 unused
    std::vector<std::map<std::int64_t, std::int64_t>> histograms; // membership count -> #nodes
    std::string to_json() const;
};

ComplexStats complex_stats(const SimplicialComplex& sc);

/// Text serialization: "order p" section headers, then one simplex per line as
/// sorted node ids. Round-trips losslessly.
void save_complex(const SimplicialComplex& sc, const std::filesystem::path& path);
SimplicialComplex load_complex(const std::filesystem::path& path);

} // namespace hpgnn
