#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"

#include "hpgnn/errors.hpp"
#include "hpgnn/graph_io.hpp"
#include "hpgnn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace hpgnn;
using fixtures::TempDir;

namespace {

/// Configuration for a quick, reliably separable experiment on a bundled SBM.
ExperimentConfig sbm_config(const std::filesystem::path& manifest,
                            const std::filesystem::path& out_dir) {
    ExperimentConfig cfg;
    cfg.dataset = manifest.string();
    cfg.out_dir = out_dir.string();
    cfg.max_order = 1;
    cfg.hops = 5;
    cfg.solver = "exact";
    cfg.hidden = 16;
    cfg.lr = 0.2;
    cfg.max_epochs = 200;
    cfg.patience = 50;
    cfg.num_splits = 2;
    cfg.runs_per_split = 2;
    cfg.seed = 7;
    return cfg;
}

std::filesystem::path write_sbm_bundle(const TempDir& tmp, std::uint64_t seed) {
    fixtures::SbmFixture sbm = fixtures::sbm_two_block(120, 0.12, 0.005, seed);
    return write_bundle(sbm.graph, tmp.path(), "sbm");
}

} // namespace

TEST_CASE("splits of ten nodes with 60/20/20 fractions come out 6/2/2") {
    std::vector<int> labels = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    auto splits = make_splits(10, labels, 0.6, 0.2, 0.2, 1, 11);
    REQUIRE(splits.size() == 1);
    CHECK(splits[0].train.size() == 6);
    CHECK(splits[0].val.size() == 2);
    CHECK(splits[0].test.size() == 2);
}

TEST_CASE("splits are deterministic in the seed and vary across it") {
    std::vector<int> labels = fixtures::random_labels(50, 3, 13);
    auto a = make_splits(50, labels, 0.6, 0.2, 0.2, 3, 17);
    auto b = make_splits(50, labels, 0.6, 0.2, 0.2, 3, 17);
    auto c = make_splits(50, labels, 0.6, 0.2, 0.2, 3, 18);
    REQUIRE(a.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(a[s].train == b[s].train);
        CHECK(a[s].val == b[s].val);
        CHECK(a[s].test == b[s].test);
    }
    bool differs = false;
    for (std::size_t s = 0; s < 3; ++s) differs = differs || a[s].train != c[s].train;
    CHECK(differs);
    // Independent splits should not repeat either.
    CHECK(a[0].train != a[1].train);
}

TEST_CASE("each split partitions the node set exactly") {
    std::vector<int> labels = fixtures::random_labels(73, 4, 19);
    auto splits = make_splits(73, labels, 0.55, 0.25, 0.2, 4, 23);
    for (const auto& s : splits) {
        std::vector<NodeId> all;
        all.insert(all.end(), s.train.begin(), s.train.end());
        all.insert(all.end(), s.val.begin(), s.val.end());
        all.insert(all.end(), s.test.begin(), s.test.end());
        REQUIRE(all.size() == 73);
        std::sort(all.begin(), all.end());
        for (NodeId v = 0; v < 73; ++v) CHECK(all[v] == v);
        CHECK(std::is_sorted(s.train.begin(), s.train.end()));
        CHECK(std::is_sorted(s.val.begin(), s.val.end()));
        CHECK(std::is_sorted(s.test.begin(), s.test.end()));
    }
}

TEST_CASE("stratified splits keep every class within one of its quota") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        std::int64_t n = 40 + static_cast<std::int64_t>(seed) * 17;
        int classes = 2 + static_cast<int>(seed % 4);
        std::vector<int> labels = fixtures::random_labels(n, classes, 29 + seed);
        std::vector<std::int64_t> class_sizes(static_cast<std::size_t>(classes), 0);
        for (int y : labels) ++class_sizes[y];
        if (*std::min_element(class_sizes.begin(), class_sizes.end()) < 3) continue;

        auto splits = make_splits(n, labels, 0.6, 0.2, 0.2, 2, 31 + seed);
        for (const auto& s : splits) {
            const std::array<const std::vector<NodeId>*, 3> parts = {&s.train, &s.val, &s.test};
            const std::array<double, 3> fracs = {0.6, 0.2, 0.2};
            for (int part = 0; part < 3; ++part) {
                std::vector<std::int64_t> hist(static_cast<std::size_t>(classes), 0);
                for (NodeId v : *parts[part]) ++hist[labels[v]];
                for (int c = 0; c < classes; ++c) {
                    double quota = fracs[part] * static_cast<double>(class_sizes[c]);
                    CHECK(std::abs(static_cast<double>(hist[c]) - quota) <= 1.0 + 1e-9);
                }
            }
        }
    }
}

TEST_CASE("stratification fails loudly when a class is too small") {
    std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
    CHECK_THROWS_AS(make_splits(10, labels, 0.6, 0.2, 0.2, 1, 37), StratificationError);
    // The non-stratified toggle handles the same input.
    auto splits = make_splits(10, labels, 0.6, 0.2, 0.2, 1, 37, /*stratified=*/false);
    CHECK(splits[0].train.size() == 6);

    CHECK_THROWS_AS(make_splits(5, labels, 0.6, 0.2, 0.2, 1, 37), StratificationError);
    std::vector<int> negative = {0, -1, 0, 1, 0, 1, 0, 1, 0, 1};
    CHECK_THROWS_AS(make_splits(10, negative, 0.6, 0.2, 0.2, 1, 37), StratificationError);
}

TEST_CASE("split fractions are validated") {
    std::vector<int> labels = fixtures::random_labels(20, 2, 41);
    CHECK_THROWS_AS(make_splits(20, labels, 0.6, 0.2, 0.1, 1, 1), InvalidArgumentError);
    CHECK_THROWS_AS(make_splits(20, labels, -0.1, 0.6, 0.5, 1, 1), InvalidArgumentError);
    CHECK_NOTHROW(make_splits(20, labels, 0.8, 0.0, 0.2, 1, 1));
}

TEST_CASE("config JSON round-trips every field") {
    ExperimentConfig cfg;
    cfg.dataset = "data/toy.json";
    cfg.max_order = 3;
    cfg.hops = 7;
    cfg.alpha = 0.2;
    cfg.lambda = 1e-7;
    cfg.omega = 1.1;
    cfg.epsilon = 1e-9;
    cfg.drop_threshold = 1e-11;
    cfg.binarize = true;
    cfg.operator_mode = "sym_adj";
    cfg.solver = "exact";
    cfg.lr = 0.1;
    cfg.weight_decay = 0.01;
    cfg.momentum = 0.8;
    cfg.dropout = 0.3;
    cfg.hidden = 32;
    cfg.patience = 55;
    cfg.max_epochs = 321;
    cfg.train_fraction = 0.5;
    cfg.val_fraction = 0.25;
    cfg.test_fraction = 0.25;
    cfg.stratified = false;
    cfg.num_splits = 4;
    cfg.runs_per_split = 6;
    cfg.seed = 99;
    cfg.workers = 2;
    cfg.out_dir = "results";

    nlohmann::json j = cfg.to_json();
    ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json().dump() == j.dump());
    CHECK(back.epsilon.has_value());
    CHECK(*back.epsilon == 1e-9);
    CHECK(back.stratified == false);
    CHECK(back.out_dir == "results");

    ExperimentConfig defaults;
    nlohmann::json dj = defaults.to_json();
    CHECK(dj["epsilon"].is_null());
    CHECK(ExperimentConfig::from_json(dj).to_json().dump() == dj.dump());
    // Partial documents overlay the defaults.
    ExperimentConfig partial = ExperimentConfig::from_json(nlohmann::json{{"alpha", 0.3}});
    CHECK(partial.alpha == 0.3);
    CHECK(partial.hops == defaults.hops);
}

TEST_CASE("config validation rejects bad modes and fractions") {
    ExperimentConfig cfg;
    cfg.dataset = "x.edges";
    CHECK_NOTHROW(cfg.validate());
    cfg.operator_mode = "magic";
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = ExperimentConfig{};
    cfg.dataset = "x.edges";
    cfg.solver = "qr";
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = ExperimentConfig{};
    cfg.dataset = "x.edges";
    cfg.train_fraction = 0.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = ExperimentConfig{};
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError); // empty dataset
    cfg = ExperimentConfig{};
    cfg.dataset = "x.edges";
    cfg.optimizer = "adam";
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
}

TEST_CASE("cache keys are stable for equal configs and move with any field") {
    ExperimentConfig a;
    a.dataset = "d.json";
    ExperimentConfig b = a;
    CHECK(a.cache_key() == b.cache_key());
    CHECK(a.cache_key().size() == 16);

    b.alpha = 0.2;
    CHECK(a.cache_key() != b.cache_key());
    b = a;
    b.hops = 11;
    CHECK(a.cache_key() != b.cache_key());
    b = a;
    b.dataset = "other.json";
    CHECK(a.cache_key() != b.cache_key());
    b = a;
    b.stratified = false;
    CHECK(a.cache_key() != b.cache_key());
}

TEST_CASE("self-loop symmetric normalization matches the dense formula") {
    Graph g = fixtures::erdos_renyi(25, 0.2, 43);
    Eigen::SparseMatrix<double> a(g.n, g.n);
    std::vector<Eigen::Triplet<double>> trips;
    for (auto [u, v] : g.edges) {
        trips.emplace_back(u, v, 1.0);
        trips.emplace_back(v, u, 1.0);
    }
    a.setFromTriplets(trips.begin(), trips.end());

    Eigen::MatrixXd dense = Eigen::MatrixXd(a) + Eigen::MatrixXd::Identity(g.n, g.n);
    Eigen::VectorXd scale = dense.colwise().sum().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd want = scale.asDiagonal() * dense * scale.asDiagonal();
    Eigen::MatrixXd got = Eigen::MatrixXd(sym_normalized_self_loops(a));
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-14);

    // K2: (A+I) is all-ones, degrees 2 -> every entry 1/2.
    Graph k2 = fixtures::complete_graph(2);
    Eigen::SparseMatrix<double> a2(2, 2);
    a2.insert(0, 1) = 1.0;
    a2.insert(1, 0) = 1.0;
    Eigen::MatrixXd k2n = Eigen::MatrixXd(sym_normalized_self_loops(a2));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(k2n(i, j) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("build_operators produces one operator per order and caches them") {
    TempDir tmp("harness_cache");
    fixtures::SbmFixture sbm = fixtures::sbm_two_block(60, 0.2, 0.02, 47);
    ExperimentConfig cfg;
    cfg.dataset = "inline"; // only the hash input; the graph is passed directly
    cfg.out_dir = tmp.file("out").string();
    cfg.max_order = 2;
    cfg.solver = "exact";

    OperatorBundle first = build_operators(sbm.graph, cfg);
    REQUIRE(first.operators.size() == 2);
    CHECK_FALSE(first.cache_hit);
    CHECK(first.operators[0].rows() == sbm.graph.n);
    CHECK(first.total_nnz > 0);

    OperatorBundle second = build_operators(sbm.graph, cfg);
    CHECK(second.cache_hit);
    REQUIRE(second.operators.size() == 2);
    for (int p = 0; p < 2; ++p)
        CHECK((Eigen::MatrixXd(second.operators[p]) - Eigen::MatrixXd(first.operators[p]))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);

    OperatorBundle uncached = build_operators(sbm.graph, cfg, /*use_cache=*/false);
    CHECK_FALSE(uncached.cache_hit);
    for (int p = 0; p < 2; ++p)
        CHECK((Eigen::MatrixXd(uncached.operators[p]) - Eigen::MatrixXd(first.operators[p]))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);

    // A different config key must not reuse the entry.
    ExperimentConfig other = cfg;
    other.alpha = 0.2;
    CHECK_FALSE(build_operators(sbm.graph, other).cache_hit);
}

TEST_CASE("sym_adj operator mode skips PPR entirely") {
    TempDir tmp("harness_symadj");
    fixtures::SbmFixture sbm = fixtures::sbm_two_block(40, 0.2, 0.02, 53);
    ExperimentConfig cfg;
    cfg.dataset = "inline";
    cfg.out_dir = tmp.file("out").string();
    cfg.max_order = 2;
    cfg.operator_mode = "sym_adj";
    OperatorBundle bundle = build_operators(sbm.graph, cfg, /*use_cache=*/false);
    REQUIRE(bundle.operators.size() == 2);
    // Self-loop normalization keeps a unit-diagonal contribution.
    Eigen::MatrixXd op1 = Eigen::MatrixXd(bundle.operators[0]);
    CHECK(op1.diagonal().minCoeff() > 0.0);
    CHECK((op1 - op1.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("experiment on a separable SBM reaches high accuracy with a tight CI") {
    TempDir tmp("harness_exp");
    auto manifest = write_sbm_bundle(tmp, 59);
    ExperimentConfig cfg = sbm_config(manifest, tmp.file("out"));
    RunReport report = run_experiment(cfg);

    CHECK(report.sample_size == 4);
    REQUIRE(report.runs.size() == 4);
    CHECK(report.mean_test_acc >= 0.9);
    CHECK(report.ci95_half_width < 0.1);
    CHECK(report.peak_memory_mb_estimate > 0.0);

    // Recomputation check: the mean is the arithmetic mean of the raw runs.
    double mean = 0;
    for (const auto& r : report.runs) mean += r.test_acc;
    mean /= static_cast<double>(report.runs.size());
    CHECK(report.mean_test_acc == doctest::Approx(mean).epsilon(1e-12));

    // CI recomputed with the frozen t quantile for df=3.
    double sq = 0;
    for (const auto& r : report.runs) sq += (r.test_acc - mean) * (r.test_acc - mean);
    double sd = std::sqrt(sq / 3.0);
    double want_ci = 3.182446305284263 * sd / 2.0;
    CHECK(report.ci95_half_width == doctest::Approx(want_ci).epsilon(1e-9));

    // Artifacts land in out_dir.
    CHECK(std::filesystem::exists(tmp.file("out") / "report.json"));
    CHECK(std::filesystem::exists(tmp.file("out") / "history.csv"));
    CHECK(std::filesystem::exists(tmp.file("out") / "aggregate.csv"));
    CHECK(std::filesystem::exists(tmp.file("out") / "checkpoint.json"));
}

TEST_CASE("a second invocation hits the PPR cache and reproduces the report") {
    TempDir tmp("harness_repro");
    auto manifest = write_sbm_bundle(tmp, 61);
    ExperimentConfig cfg = sbm_config(manifest, tmp.file("out"));
    cfg.solver = "push";
    cfg.num_splits = 1;
    cfg.runs_per_split = 2;

    RunReport first = run_experiment(cfg);
    RunReport second = run_experiment(cfg);
    CHECK_FALSE(first.ppr_cache_hit);
    CHECK(second.ppr_cache_hit);
    CHECK(first.to_json(false).dump() == second.to_json(false).dump());
    // Timing and cache-hit fields exist only in the full payload.
    nlohmann::json full = second.to_json(true);
    CHECK(full.contains("ppr_stage_seconds"));
    CHECK(full.contains("ppr_cache_hit"));
    nlohmann::json bare = second.to_json(false);
    CHECK_FALSE(bare.contains("ppr_stage_seconds"));
    CHECK_FALSE(bare.contains("ppr_cache_hit"));
    CHECK_FALSE(bare.contains("total_seconds"));
}

TEST_CASE("stage failures carry the stage name") {
    ExperimentConfig cfg;
    cfg.dataset = "definitely_missing.edges";
    cfg.out_dir = "unused";
    try {
        run_experiment(cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("stage load") != std::string::npos);
    }
}

TEST_CASE("experiments require features and labels") {
    TempDir tmp("harness_missing");
    Graph bare = fixtures::erdos_renyi(20, 0.2, 67); // no features, no labels
    auto manifest = write_bundle(bare, tmp.path(), "bare");
    ExperimentConfig cfg = sbm_config(manifest, tmp.file("out"));
    CHECK_THROWS_AS(run_experiment(cfg), MissingDataError);
}

TEST_CASE("expectations table carries the published benchmark statistics") {
    const auto& table = known_dataset_expectations();
    REQUIRE(table.size() == 7);
    auto find = [&](const std::string& name) {
        auto it = std::find_if(table.begin(), table.end(),
                               [&](const DatasetExpectation& d) { return d.name == name; });
        REQUIRE(it != table.end());
        return *it;
    };
    DatasetExpectation cornell = find("cornell");
    CHECK(cornell.nodes == 183);
    CHECK(cornell.edge_endpoints == 298);
    CHECK(cornell.features == 1703);
    CHECK(cornell.classes == 5);
    CHECK(cornell.triangles == 59);
    CHECK(cornell.homophily == doctest::Approx(0.127).epsilon(1e-12));
    CHECK(find("texas").homophily == doctest::Approx(0.087).epsilon(1e-12));
    CHECK(find("cora").nodes == 2708);
    CHECK(find("cora").edge_endpoints == 10556);
    CHECK(find("citeseer").classes == 7);
    CHECK(find("photo").triangles == 717400);
    CHECK(find("actor").nodes == 7600);
    CHECK(find("wisconsin").homophily == doctest::Approx(0.192).epsilon(1e-12));
}

TEST_CASE("dataset sanity reports statistics and flags mismatches") {
    TempDir tmp("harness_sanity");
    Graph tri = fixtures::triangle_graph();
    tri.labels = {0, 0, 1};
    tri.features = fixtures::random_features(3, 2, 71);
    auto manifest = write_bundle(tri, tmp.path(), "toytri");

    SanityReport report = dataset_sanity(manifest);
    CHECK(report.nodes == 3);
    CHECK(report.undirected_edges == 3);
    CHECK(report.edge_endpoints == 6);
    CHECK(report.triangles == 1);
    CHECK(report.features == 2);
    CHECK(report.classes == 2);
    // Same-label neighbor fractions: 1/2, 1/2, 0 -> mean 1/3.
    CHECK(report.homophily == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_FALSE(report.expected.has_value()); // name not in the table
    CHECK(report.clean());
    nlohmann::json j = report.to_json();
    CHECK(j["nodes"] == 3);
    CHECK(j["triangles"] == 1);

    // A bundle that borrows a benchmark name gets compared and flagged.
    auto fake = write_bundle(tri, tmp.path(), "cornell");
    SanityReport flagged = dataset_sanity(fake);
    REQUIRE(flagged.expected.has_value());
    CHECK(flagged.expected->nodes == 183);
    CHECK_FALSE(flagged.clean());
    bool mentions_nodes = false;
    for (const auto& f : flagged.flags)
        mentions_nodes = mentions_nodes || f.find("nodes") != std::string::npos;
    CHECK(mentions_nodes);
}

TEST_CASE("aggregate CSV encodes the dataset and variant with the CI") {
    TempDir tmp("harness_csv");
    RunReport report;
    report.config.dataset = "data/sbm.json";
    report.config.max_order = 2;
    report.config.hops = 10;
    report.mean_test_acc = 0.91;
    report.ci95_half_width = 0.02;
    report.sample_size = 9;
    save_aggregate_csv(report, tmp.file("agg.csv"));
    std::ifstream in(tmp.file("agg.csv"));
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "dataset,variant,mean_test_acc,ci95_half_width,sample_size");
    CHECK(row.find("ppr_P2_K10") != std::string::npos);
    CHECK(row.find("0.91") != std::string::npos);
}

TEST_CASE("history log rows record their split and run indices") {
    TempDir tmp("harness_hist");
    HistoryLog log;
    log.rows.push_back({0, 0, 0, 1.0, 0.5, 0.4, 0.3});
    log.rows.push_back({1, 2, 5, 0.4, 0.9, 0.8, 0.85});
    save_history_log(log, tmp.file("h.csv"));
    std::ifstream in(tmp.file("h.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "split,run,epoch,train_loss,train_acc,val_acc,test_acc");
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}
