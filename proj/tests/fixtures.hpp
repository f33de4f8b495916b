#pragma once

#include "hpgnn/graph.hpp"
#include "hpgnn/graph_io.hpp"
#include "hpgnn/util.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace fixtures {

using hpgnn::Graph;
using hpgnn::NodeId;

/// Unique scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("hpgnn_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Graph path_graph(std::int64_t n) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return Graph::from_edges(n, std::move(edges));
}

inline Graph complete_graph(std::int64_t n) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    return Graph::from_edges(n, std::move(edges));
}

inline Graph triangle_graph() { return complete_graph(3); }

/// G(n, p) with a deterministic engine.
inline Graph erdos_renyi(std::int64_t n, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(p);
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j)
            if (coin(rng)) edges.emplace_back(i, j);
    return Graph::from_edges(n, std::move(edges));
}

/// Two-block stochastic block model with one-hot-ish block features plus
/// noise dimensions; labels are the blocks. Heavily homophilic by default.
struct SbmFixture {
    Graph graph;
    int classes = 2;
};

inline SbmFixture sbm_two_block(std::int64_t n, double p_intra, double p_inter,
                                std::uint64_t seed, int noise_dims = 8,
                                double feature_noise = 0.5) {
    std::mt19937_64 rng(seed);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? 0 : 1;

    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j) {
            double p = labels[i] == labels[j] ? p_intra : p_inter;
            if (std::uniform_real_distribution<double>(0, 1)(rng) < p)
                edges.emplace_back(i, j);
        }
    Graph g = Graph::from_edges(n, std::move(edges));
    g.labels = labels;

    std::normal_distribution<double> noise(0.0, feature_noise);
    g.features.resize(n, 2 + noise_dims);
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t f = 0; f < g.features.cols(); ++f) g.features(i, f) = noise(rng);
        g.features(i, labels[i]) += 1.0;
    }
    return SbmFixture{std::move(g), 2};
}

/// Random dense features for model tests.
inline Eigen::MatrixXd random_features(std::int64_t n, std::int64_t f, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd x(n, f);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < f; ++j) x(i, j) = dist(rng);
    return x;
}

inline std::vector<int> random_labels(std::int64_t n, int classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dist(0, classes - 1);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& y : labels) y = dist(rng);
    return labels;
}

/// Dense column-stochastic walk matrix of a graph; zero columns for isolated
/// nodes. Small-n oracle for the sparse normalize().
inline Eigen::MatrixXd dense_column_stochastic(const Graph& g) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.n, g.n);
    for (const auto& [u, v] : g.edges) {
        a(u, v) = 1.0;
        a(v, u) = 1.0;
    }
    for (std::int64_t c = 0; c < g.n; ++c) {
        double sum = a.col(c).sum();
        if (sum > 0) a.col(c) /= sum;
    }
    return a;
}

/// Dense PPR oracle: alpha (I - (1-alpha) W)^-1 for any column-stochastic W.
inline Eigen::MatrixXd dense_ppr(const Eigen::MatrixXd& walk, double alpha) {
    std::int64_t n = walk.rows();
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - (1.0 - alpha) * walk;
    return alpha * system.inverse();
}

} // namespace fixtures
