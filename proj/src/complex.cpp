#include "hpgnn/complex.hpp"
#include "hpgnn/errors.hpp"
#include "hpgnn/graph_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace hpgnn {

Eigen::SparseMatrix<double> SimplicialComplex::incidence(int p) const {
    if (p < 1 || p > max_order) throw BoundsError("incidence order out of range");
    std::int64_t m = simplex_count(p);
    Eigen::SparseMatrix<double> b(n, m);
    b.reserve(Eigen::VectorXi::Constant(m, p + 1));
    for (std::int64_t j = 0; j < m; ++j)
        for (NodeId v : simplex(p, j)) b.insert(v, j) = 1.0; // tuples are sorted
    b.makeCompressed();
    return b;
}

SimplicialComplex enumerate_cliques(const Graph& g, int max_order, std::int64_t cap) {
    if (max_order < 1) throw InvalidArgumentError("max_order must be >= 1");
    SimplicialComplex sc;
    sc.max_order = max_order;
    sc.n = g.n;
    sc.flat.resize(static_cast<std::size_t>(max_order) + 1);

    auto& edges = sc.flat[1];
    edges.reserve(g.edges.size() * 2);
    for (const auto& [u, v] : g.edges) {
        edges.push_back(u);
        edges.push_back(v);
    }
    if (g.num_undirected_edges() > cap)
        throw BoundsError("order-1 simplex count exceeds cap");

    // Grow (p+1)-cliques from p-cliques: extend each clique by common
    // neighbors strictly greater than its last vertex. Sorted adjacency makes
    // the intersection a linear merge; the output order stays lexicographic.
    std::vector<NodeId> common, next_common;
    for (int p = 2; p <= max_order; ++p) {
        const auto& prev = sc.flat[p - 1];
        auto& cur = sc.flat[p];
        std::int64_t prev_count = sc.simplex_count(p - 1);
        std::int64_t produced = 0;
        for (std::int64_t i = 0; i < prev_count; ++i) {
            const NodeId* tup = prev.data() + i * p;
            auto nb = g.neighbors_of(tup[0]);
            NodeId last = tup[p - 1];
            common.assign(std::upper_bound(nb.begin(), nb.end(), last), nb.end());
            for (int k = 1; k < p && !common.empty(); ++k) {
                auto nbk = g.neighbors_of(tup[k]);
                next_common.clear();
                std::set_intersection(common.begin(), common.end(),
                                      std::upper_bound(nbk.begin(), nbk.end(), last), nbk.end(),
                                      std::back_inserter(next_common));
                common.swap(next_common);
            }
            for (NodeId w : common) {
                if (++produced > cap)
                    throw BoundsError("order-" + std::to_string(p) +
                                      " simplex count exceeds cap " + std::to_string(cap));
                cur.insert(cur.end(), tup, tup + p);
                cur.push_back(w);
            }
        }
    }
    return sc;
}

HigherOrderAdjacency higher_adjacency(const SimplicialComplex& sc, int p, bool binarize) {
    if (p < 1 || p > sc.max_order) throw BoundsError("adjacency order out of range");
    HigherOrderAdjacency result;
    result.order = p;
    result.simplex_count = sc.simplex_count(p);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(result.simplex_count) * p * (p + 1));
    for (std::int64_t i = 0; i < result.simplex_count; ++i) {
        auto tup = sc.simplex(p, i);
        for (int a = 0; a <= p; ++a)
            for (int b = 0; b <= p; ++b)
                if (a != b) triplets.emplace_back(tup[a], tup[b], 1.0);
    }
    Eigen::SparseMatrix<double> counts(sc.n, sc.n);
    counts.setFromTriplets(triplets.begin(), triplets.end()); // duplicates sum
    if (binarize)
        for (std::int64_t c = 0; c < sc.n; ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(counts, c); it; ++it)
                it.valueRef() = 1.0;
    counts.makeCompressed();

    result.degrees.assign(static_cast<std::size_t>(sc.n), 0.0);
    for (std::int64_t c = 0; c < sc.n; ++c) {
        double sum = 0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(counts, c); it; ++it)
            sum += it.value();
        result.degrees[c] = sum;
    }

    Eigen::SparseMatrix<double> norm = counts;
    for (std::int64_t c = 0; c < sc.n; ++c) {
        if (result.degrees[c] == 0) continue;
        for (Eigen::SparseMatrix<double>::InnerIterator it(norm, c); it; ++it)
            it.valueRef() /= result.degrees[c];
    }
    result.counts = std::move(counts);
    result.normalized = std::move(norm);
    return result;
}

ComplexStats complex_stats(const SimplicialComplex& sc) {
    ComplexStats stats;
    stats.n = sc.n;
    stats.max_order = sc.max_order;
    stats.counts.assign(static_cast<std::size_t>(sc.max_order) + 1, 0);
    stats.histograms.resize(static_cast<std::size_t>(sc.max_order) + 1);
    std::vector<std::int64_t> membership;
    for (int p = 1; p <= sc.max_order; ++p) {
        stats.counts[p] = sc.simplex_count(p);
        membership.assign(static_cast<std::size_t>(sc.n), 0);
        for (NodeId v : sc.flat[p]) ++membership[v];
        for (std::int64_t count : membership) ++stats.histograms[p][count];
    }
    return stats;
}

std::string ComplexStats::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["max_order"] = max_order;
    nlohmann::json counts_j = nlohmann::json::object();
    nlohmann::json hist_j = nlohmann::json::object();
    for (int p = 1; p <= max_order; ++p) {
        counts_j[std::to_string(p)] = counts[p];
        nlohmann::json h = nlohmann::json::object();
        for (const auto& [membership, nodes] : histograms[p])
            h[std::to_string(membership)] = nodes;
        hist_j[std::to_string(p)] = h;
    }
    j["simplex_counts"] = counts_j;
    j["membership_histograms"] = hist_j;
    return j.dump(2);
}

void save_complex(const SimplicialComplex& sc, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# nodes " << sc.n << "\n";
    for (int p = 1; p <= sc.max_order; ++p) {
        out << "order " << p << "\n";
        std::int64_t m = sc.simplex_count(p);
        for (std::int64_t i = 0; i < m; ++i) {
            auto tup = sc.simplex(p, i);
            for (int k = 0; k <= p; ++k) {
                if (k) out << ' ';
                out << tup[k];
            }
            out << '\n';
        }
    }
    atomic_write_file(path, out.str());
}

SimplicialComplex load_complex(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open complex file " + path.string());
    SimplicialComplex sc;
    sc.flat.resize(2);
    sc.max_order = 1;
    int current = 0;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.rfind("# nodes", 0) == 0) {
            std::istringstream hs(line.substr(7));
            if (!(hs >> sc.n) || sc.n < 0)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": bad node-count header");
            continue;
        }
        if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (line.rfind("order", 0) == 0) {
            std::istringstream hs(line.substr(5));
            if (!(hs >> current) || current < 1)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": bad order header");
            if (current >= static_cast<int>(sc.flat.size()))
                sc.flat.resize(static_cast<std::size_t>(current) + 1);
            sc.max_order = std::max(sc.max_order, current);
            continue;
        }
        if (current == 0)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": simplex before any order header");
        std::istringstream ls(line);
        std::int64_t id;
        int read = 0;
        while (ls >> id) {
            sc.flat[current].push_back(static_cast<NodeId>(id));
            ++read;
        }
        if (read != current + 1)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(current + 1) + " node ids, got " +
                             std::to_string(read));
    }
    return sc;
}

} // namespace hpgnn
