#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"

#include "hpgnn/errors.hpp"
#include "hpgnn/graph.hpp"
#include "hpgnn/graph_io.hpp"

#include <fstream>

using namespace hpgnn;
using fixtures::TempDir;

namespace {
void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}
} // namespace

TEST_CASE("triangle edge list loads with n=3, three edges, all degrees 2") {
    TempDir tmp("graph_tri");
    write_text(tmp.file("tri.edges"), "0 1\n1 2\n2 0\n");
    Graph g = load_graph(tmp.file("tri.edges"));
    CHECK(g.n == 3);
    CHECK(g.num_undirected_edges() == 3);
    CHECK(g.num_edge_endpoints() == 6);
    for (NodeId v = 0; v < 3; ++v) CHECK(g.degree(v) == 2);
    g.validate();
}

TEST_CASE("duplicate reversed edge collapses to one undirected edge") {
    TempDir tmp("graph_dup");
    write_text(tmp.file("dup.edges"), "0 1\n1 0\n");
    Graph g = load_graph(tmp.file("dup.edges"));
    CHECK(g.n == 2);
    CHECK(g.num_undirected_edges() == 1);
}

TEST_CASE("self loops are dropped, comments and blank lines ignored") {
    TempDir tmp("graph_self");
    write_text(tmp.file("g.edges"), "# a comment\n0 1\n\n1 1\n 2 0 # trailing comment\n");
    Graph g = load_graph(tmp.file("g.edges"));
    CHECK(g.n == 3);
    CHECK(g.num_undirected_edges() == 2);
    CHECK(g.degree(1) == 1);
}

TEST_CASE("malformed edge line raises a parse error naming the line") {
    TempDir tmp("graph_bad");
    write_text(tmp.file("bad.edges"), "0 1\n2 x\n");
    CHECK_THROWS_AS(load_graph(tmp.file("bad.edges")), ParseError);
    try {
        load_graph(tmp.file("bad.edges"));
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("node-count header keeps trailing isolated nodes") {
    TempDir tmp("graph_header");
    write_text(tmp.file("g.edges"), "# nodes 5\n0 1\n");
    Graph g = load_graph(tmp.file("g.edges"));
    CHECK(g.n == 5);
    CHECK(g.degree(4) == 0);

    write_text(tmp.file("small.edges"), "# nodes 1\n0 1\n");
    CHECK_THROWS_AS(load_graph(tmp.file("small.edges")), ParseError);
}

TEST_CASE("remap_ids compacts arbitrary ids and keeps the mapping") {
    TempDir tmp("graph_remap");
    write_text(tmp.file("g.edges"), "100 7\n7 42\n");
    LoadOptions opts;
    opts.remap_ids = true;
    Graph g = load_graph(tmp.file("g.edges"), std::nullopt, std::nullopt, opts);
    CHECK(g.n == 3);
    REQUIRE(g.original_ids.size() == 3);
    CHECK(g.original_ids[0] == 7);
    CHECK(g.original_ids[1] == 42);
    CHECK(g.original_ids[2] == 100);
    // 7-42 and 7-100 are the two edges; compact node 0 is original 7.
    CHECK(g.degree(0) == 2);
}

TEST_CASE("feature row mismatch raises a dimension error") {
    TempDir tmp("graph_featdim");
    write_text(tmp.file("g.edges"), "0 1\n1 2\n");
    write_text(tmp.file("g.feat"), "1.0 2.0\n3.0 4.0\n");
    CHECK_THROWS_AS(load_graph(tmp.file("g.edges"), tmp.file("g.feat")), DimensionError);
}

TEST_CASE("ragged feature row raises a parse error") {
    TempDir tmp("graph_ragged");
    write_text(tmp.file("g.feat"), "1.0 2.0\n3.0\n");
    CHECK_THROWS_AS(load_features_text(tmp.file("g.feat")), ParseError);
}

TEST_CASE("K2 column-stochastic normalization is the swap matrix") {
    Graph g = fixtures::complete_graph(2);
    NormalizedAdjacency adj = normalize(g, NormMode::ColumnStochastic);
    Eigen::MatrixXd dense = Eigen::MatrixXd(adj.entries);
    CHECK(dense(0, 0) == 0.0);
    CHECK(dense(0, 1) == 1.0);
    CHECK(dense(1, 0) == 1.0);
    CHECK(dense(1, 1) == 0.0);
}

TEST_CASE("triangle column-stochastic entries are all 1/2 off-diagonal") {
    Graph g = fixtures::triangle_graph();
    NormalizedAdjacency adj = normalize(g, NormMode::ColumnStochastic);
    Eigen::MatrixXd dense = Eigen::MatrixXd(adj.entries);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(dense(i, j) == (i == j ? 0.0 : 0.5));
}

TEST_CASE("path graph symmetric normalization gives 1/sqrt(2) at (0,1)") {
    Graph g = fixtures::path_graph(3);
    NormalizedAdjacency adj = normalize(g, NormMode::Symmetric);
    // d_0 = 1, d_1 = 2: A(0,1)/sqrt(d_0 d_1) = 1/sqrt(2).
    CHECK(Eigen::MatrixXd(adj.entries)(0, 1) ==
          doctest::Approx(0.70710678118654746).epsilon(1e-15));
}

TEST_CASE("column sums of the walk matrix mark exactly the nonzero-degree nodes") {
    Graph g = fixtures::erdos_renyi(60, 0.05, 7);
    NormalizedAdjacency adj = normalize(g, NormMode::ColumnStochastic);
    Eigen::RowVectorXd colsums = Eigen::RowVectorXd::Ones(g.n) * adj.entries;
    for (NodeId v = 0; v < g.n; ++v) {
        if (g.degree(v) == 0)
            CHECK(colsums[v] == 0.0);
        else
            CHECK(colsums[v] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("walk matrix equals the dense column-stochastic oracle") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Graph g = fixtures::erdos_renyi(40, 0.1, seed);
        Eigen::MatrixXd got = Eigen::MatrixXd(normalize(g, NormMode::ColumnStochastic).entries);
        Eigen::MatrixXd want = fixtures::dense_column_stochastic(g);
        CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("degree sum equals twice the undirected edge count on random graphs") {
    for (std::uint64_t seed : {11ull, 12ull, 13ull, 14ull}) {
        Graph g = fixtures::erdos_renyi(80, 0.07, seed);
        std::int64_t total = 0;
        for (NodeId v = 0; v < g.n; ++v) total += g.degree(v);
        CHECK(total == 2 * g.num_undirected_edges());
        g.validate();
    }
}

TEST_CASE("homophily on K2: shared label 1, split labels 0") {
    Graph g = fixtures::complete_graph(2);
    g.labels = {0, 0};
    CHECK(node_homophily(g) == 1.0);
    g.labels = {0, 1};
    CHECK(node_homophily(g) == 0.0);
}

TEST_CASE("homophily requires labels and skips isolated nodes") {
    Graph g = fixtures::complete_graph(2);
    CHECK_THROWS_AS(node_homophily(g), MissingDataError);

    Graph with_isolated = Graph::from_edges(3, {{0, 1}});
    with_isolated.labels = {0, 1, 0};
    // Node 2 is isolated; remaining nodes disagree with their only neighbor.
    CHECK(node_homophily(with_isolated) == 0.0);
}

TEST_CASE("homophily is invariant under class-id relabeling") {
    Graph g = fixtures::erdos_renyi(50, 0.1, 21);
    g.labels = fixtures::random_labels(g.n, 4, 22);
    double before = node_homophily(g);
    int perm[4] = {2, 3, 0, 1};
    for (auto& y : g.labels) y = perm[y];
    CHECK(node_homophily(g) == before);
}

TEST_CASE("edge list save/load round-trips the graph exactly") {
    TempDir tmp("graph_rt");
    Graph g = fixtures::erdos_renyi(30, 0.1, 31);
    save_edge_list(g, tmp.file("g.edges"));
    Graph back = load_graph(tmp.file("g.edges"));
    CHECK(back.n == g.n);
    CHECK(back.edges == g.edges);

    save_edge_list(back, tmp.file("g2.edges"));
    Graph again = load_graph(tmp.file("g2.edges"));
    CHECK(again.edges == back.edges);
}

TEST_CASE("text and binary feature files round-trip bit-exactly") {
    TempDir tmp("graph_feat");
    Eigen::MatrixXd x = fixtures::random_features(9, 4, 41);
    x(0, 0) = 1e-17;
    x(1, 1) = -0.1;

    save_features_text(x, tmp.file("x.txt"));
    Eigen::MatrixXd t = load_features(tmp.file("x.txt"));
    REQUIRE(t.rows() == x.rows());
    REQUIRE(t.cols() == x.cols());
    CHECK((t - x).cwiseAbs().maxCoeff() == 0.0);

    save_features_binary(x, tmp.file("x.bin"));
    Eigen::MatrixXd b = load_features(tmp.file("x.bin"));
    CHECK((b - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("label files round-trip and reject junk") {
    TempDir tmp("graph_lab");
    std::vector<int> labels = {0, 2, 1, 2, 0};
    save_labels(labels, tmp.file("y.txt"));
    CHECK(load_labels(tmp.file("y.txt")) == labels);

    write_text(tmp.file("bad.txt"), "0\n1 2\n");
    CHECK_THROWS_AS(load_labels(tmp.file("bad.txt")), ParseError);
    write_text(tmp.file("neg.txt"), "-1\n");
    CHECK_THROWS_AS(load_labels(tmp.file("neg.txt")), ParseError);
}

TEST_CASE("bundle write/load round-trips graph, features, and labels") {
    TempDir tmp("graph_bundle");
    Graph g = fixtures::erdos_renyi(20, 0.15, 51);
    g.features = fixtures::random_features(20, 3, 52);
    g.labels = fixtures::random_labels(20, 3, 53);

    auto manifest = write_bundle(g, tmp.path(), "toy");
    Graph back = load_bundle(manifest);
    CHECK(back.n == g.n);
    CHECK(back.edges == g.edges);
    CHECK(back.labels == g.labels);
    CHECK((back.features - g.features).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bundle checksum mismatch is rejected") {
    TempDir tmp("graph_sum");
    Graph g = fixtures::triangle_graph();
    auto manifest = write_bundle(g, tmp.path(), "tri");
    {
        std::ofstream out(tmp.file("tri.edges"), std::ios::app);
        out << "0 2\n"; // duplicate line: content changes, graph would not
    }
    CHECK_THROWS_AS(load_bundle(manifest), IoError);
}

TEST_CASE("manifest shape declarations are enforced") {
    TempDir tmp("graph_manifest");
    write_text(tmp.file("g.edges"), "0 1\n");
    write_text(tmp.file("m.json"), R"({"edges": "g.edges", "n": 5})");
    CHECK_THROWS_AS(load_bundle(tmp.file("m.json")), DimensionError);
    write_text(tmp.file("ok.json"), R"({"edges": "g.edges", "n": 2})");
    CHECK(load_bundle(tmp.file("ok.json")).n == 2);
}

TEST_CASE("normalized matrix keeps the adjacency sparsity pattern") {
    Graph g = fixtures::erdos_renyi(40, 0.1, 61);
    NormalizedAdjacency adj = normalize(g, NormMode::Symmetric);
    CHECK(adj.entries.nonZeros() == g.num_edge_endpoints());
    for (NodeId v = 0; v < g.n; ++v)
        for (Eigen::SparseMatrix<double>::InnerIterator it(adj.entries, v); it; ++it) {
            auto nb = g.neighbors_of(v);
            CHECK(std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(it.row())));
        }
}

TEST_CASE("out-of-range endpoints are rejected") {
    CHECK_THROWS_AS(Graph::from_edges(3, {{0, 3}}), BoundsError);
    CHECK_THROWS_AS(Graph::from_edges(3, {{-1, 1}}), BoundsError);
}
