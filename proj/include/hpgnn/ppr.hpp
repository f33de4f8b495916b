#pragma once

#include "hpgnn/complex.hpp"
#include "hpgnn/graph.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace hpgnn {

/// Column-stochastic walk operator handed to the PPR solvers: the normalized
/// matrix itself (compressed column storage), the per-node column sums of the
/// unnormalized adjacency, and the simplex/edge count that scales the scan
/// thresholds. Views only; the owner must outlive the solve.
struct PushOperator {
    const Eigen::SparseMatrix<double>* matrix = nullptr;
    const std::vector<double>* degrees = nullptr;
    std::int64_t unit_count = 0; // m: edges at order 1, p-simplices above
    int order = 1;

    std::int64_t size() const { return matrix->cols(); }

    static PushOperator from(const NormalizedAdjacency& adj, std::int64_t edge_count);
    static PushOperator from(const HigherOrderAdjacency& adj);
};

struct PushParams {
    double alpha = 0.15;
    /// Scan-phase activation threshold; unset means lambda / (10 m).
    std::optional<double> epsilon;
    double lambda = 1e-6;
    double omega = 1.4;
    int epoch_num = 8;
    /// Queue-phase size bound; unset means floor(n/4).
    std::optional<std::int64_t> scan_threshold;
    /// Alternate reading of the queue bound: cap total pops instead of the
    /// instantaneous queue size.
    bool threshold_is_pop_budget = false;
    int max_sweeps_per_epoch = 1000;

    void validate() const;
    double effective_epsilon(std::int64_t m) const;
    std::int64_t effective_scan_threshold(std::int64_t n) const;
};

struct PushPhaseLog {
    std::int64_t queue_pops = 0;
    std::int64_t scan_sweeps = 0;
    std::int64_t push_edge_ops = 0; // neighbor traversals across both phases
    int epochs_entered = 0;
};

struct PprEstimate {
    NodeId source = 0;
    Eigen::VectorXd pi_hat;
    Eigen::VectorXd residual;
    double residual_sum = 0;     // signed sum of `residual` at return
    double abs_residual_sum = 0; // solver stopping quantity, <= lambda on success
    PushPhaseLog phase_log;
};

/// Test/diagnostic hook called after every push update.
struct PushSnapshot {
    NodeId node;
    std::span<const double> pi;
    std::span<const double> residual;
    double abs_residual_sum;
    std::int64_t update_index;
};
using PushObserver = std::function<void(const PushSnapshot&)>;

struct PprMeta {
    double alpha = 0.15;
    double lambda = 0;
    double omega = 0;
    double epsilon = 0;
    int order = 1;
    double drop_threshold = 0;
    std::string solver = "exact"; // "exact" | "push"
};

/// Per-source PPR columns assembled into an n x n operator, plus its
/// degree-symmetrized form once populated.
struct PprMatrix {
    int order = 1;
    Eigen::SparseMatrix<double> entries;    // column s = PPR vector of source s
    Eigen::SparseMatrix<double> normalized; // D^-1/2 entries D^-1/2, empty until symmetrize
    PprMeta meta;
};

/// Direct solve of the teleport fixed point per source via one sparse LU
/// factorization. Policy: n <= 20000, with a stderr warning above 5000.
PprMatrix exact_ppr_matrix(const PushOperator& op, double alpha);

/// Queue-then-scan SOR forward push from one source. On success the estimate
/// satisfies sum|residual| <= lambda, which bounds the L1 estimation error.
PprEstimate push_ppr_vector(const PushOperator& op, NodeId source, const PushParams& params,
                            const PushObserver& observer = nullptr);

struct MatrixBuildOptions {
    double drop_threshold = 1e-10; // estimate entries below this are pruned
    int workers = 1;
    bool collect_diagnostics = false;
};

struct SourceDiagnostics {
    NodeId source;
    std::int64_t pops;
    std::int64_t sweeps;
    std::int64_t push_edge_ops;
    double residual_sum;
    double wall_ms;
};

struct PushMatrixResult {
    PprMatrix matrix;
    std::vector<SourceDiagnostics> diagnostics;
    std::int64_t total_push_edge_ops = 0;
};

/// Runs the push solver from every source; columns are independent so the
/// result is identical for any worker count.
PushMatrixResult push_ppr_matrix(const PushOperator& op, const PushParams& params,
                                 const MatrixBuildOptions& build = {});

/// Populates ppr.normalized with D^-1/2 Pi D^-1/2 over the degrees of the
/// same-order adjacency; zero-degree rows/columns become zero.
void symmetrize(PprMatrix& ppr, const std::vector<double>& degrees);

/// Sparse triplet text with a header carrying PprMeta; exact round-trip.
void save_ppr_text(const PprMatrix& ppr, const std::filesystem::path& path, bool normalized_field = false);
PprMatrix load_ppr_text(const std::filesystem::path& path);

/// Dense binary dump, restricted to n <= 5000.
void save_ppr_dense_binary(const PprMatrix& ppr, const std::filesystem::path& path);
PprMatrix load_ppr_dense_binary(const std::filesystem::path& path);

void save_diagnostics(const std::vector<SourceDiagnostics>& diags, const std::filesystem::path& path);

} // namespace hpgnn
