#pragma once

#include "hpgnn/model.hpp"
#include "hpgnn/ppr.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace hpgnn {

/// One experiment: dataset, solver and filter hyperparameters, split protocol,
/// and repetition counts. Every field round-trips through JSON and feeds the
/// cache key.
struct ExperimentConfig {
    std::string dataset; // bundle manifest path, or a bare edge-list file

    int max_order = 2;  // P
    int hops = 10;      // K
    double alpha = 0.15;
    double lambda = 1e-6;
    double omega = 1.4;
    std::optional<double> epsilon; // unset -> lambda / (10 m)
    double drop_threshold = 1e-10;
    bool binarize = false;
    std::string operator_mode = "ppr"; // "ppr" | "sym_adj" (degree-normalized adjacency with self-loops)
    std::string solver = "push";       // "push" | "exact"

    double lr = 0.05;
    double weight_decay = 0.001;
    double momentum = 0.9;
    double dropout = 0.0;
    int hidden = 64;
    int patience = 200;
    int max_epochs = 1000;
    std::string optimizer = "sgd_momentum";

    double train_fraction = 0.6;
    double val_fraction = 0.2;
    double test_fraction = 0.2;
    bool stratified = true;
    int num_splits = 10;
    int runs_per_split = 10;

    std::uint64_t seed = 42;
    int workers = 1;
    std::string out_dir = "out";

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    /// fnv1a64 hex of the canonical config JSON; keys the on-disk cache.
    std::string cache_key() const;
};

struct RunRecord {
    int split = 0;
    int run = 0;
    double test_acc = 0;
    double best_val_acc = 0;
    int epochs = 0;
    int best_epoch = 0;
    double wall_seconds = 0;
};

struct RunReport {
    ExperimentConfig config;
    std::vector<RunRecord> runs;
    double mean_test_acc = 0;
    double ci95_half_width = 0; // t-interval over the per-run sample
    int sample_size = 0;
    bool ppr_cache_hit = false;
    double ppr_stage_seconds = 0;
    double mean_epoch_ms = 0;
    double total_seconds = 0;
    double peak_memory_mb_estimate = 0; // analytic, deterministic
    double max_rss_mb = 0;              // from the OS, excluded from comparisons

    /// include_timing=false drops wall-clock and RSS fields, leaving the
    /// deterministic payload used for reproducibility checks.
    nlohmann::json to_json(bool include_timing = true) const;
};

/// Stratified-by-label random partitions with exact global split sizes and
/// per-class allocation within +-1 of proportional. Deterministic under seed.
std::vector<SplitMasks> make_splits(std::int64_t n, const std::vector<int>& labels,
                                    double train_fraction, double val_fraction,
                                    double test_fraction, int num_splits, std::uint64_t seed,
                                    bool stratified = true);

/// (D+I)^-1/2 (A+I) (D+I)^-1/2 over a symmetric nonnegative adjacency.
Eigen::SparseMatrix<double> sym_normalized_self_loops(const Eigen::SparseMatrix<double>& counts);

/// Propagation operators per order, built per `config` (PPR by default, the
/// normalized self-loop adjacency for the ablation mode).
struct OperatorBundle {
    std::vector<Eigen::SparseMatrix<double>> operators; // index p-1
    bool cache_hit = false;
    double stage_seconds = 0;
    std::int64_t total_nnz = 0;
};

OperatorBundle build_operators(const Graph& g, const ExperimentConfig& config,
                               bool use_cache = true);

/// Full pipeline: load -> lift -> per-order PPR (disk-cached by config hash)
/// -> symmetrize -> train/eval over splits x runs -> aggregate.
RunReport run_experiment(const ExperimentConfig& config);

void save_report(const RunReport& report, const std::filesystem::path& path);
void save_aggregate_csv(const RunReport& report, const std::filesystem::path& path);

/// Per-(split,run) training histories, flattened for plotting.
struct HistoryLog {
    struct Row {
        int split, run, epoch;
        double train_loss, train_acc, val_acc, test_acc;
    };
    std::vector<Row> rows;
};
void save_history_log(const HistoryLog& log, const std::filesystem::path& path);

struct DatasetExpectation {
    std::string name;
    std::int64_t nodes = 0;
    std::int64_t edge_endpoints = 0;
    std::int64_t features = 0;
    int classes = 0;
    std::int64_t triangles = 0;
    double homophily = 0;
};

/// Reference statistics for the bundled benchmark datasets, keyed by name.
const std::vector<DatasetExpectation>& known_dataset_expectations();

struct SanityReport {
    std::string dataset;
    std::int64_t nodes = 0;
    std::int64_t undirected_edges = 0;
    std::int64_t edge_endpoints = 0;
    std::int64_t features = 0;
    int classes = 0;
    std::int64_t triangles = 0;
    double homophily = -1; // -1 when labels are absent
    std::optional<DatasetExpectation> expected;
    std::vector<std::string> flags; // non-fatal mismatches
    nlohmann::json to_json() const;
    bool clean() const { return flags.empty(); }
};

/// Loads a bundle, recomputes its statistics, and compares against the
/// expectations table when the dataset is recognized. Mismatches are flagged,
/// never fatal. Homophily tolerance is +-0.01 absolute.
SanityReport dataset_sanity(const std::filesystem::path& dataset_path);

} // namespace hpgnn
