#include "hpgnn/ppr.hpp"
#include "hpgnn/errors.hpp"
#include "hpgnn/graph_io.hpp"
#include "hpgnn/util.hpp"

#include <Eigen/SparseLU>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hpgnn {

PushOperator PushOperator::from(const NormalizedAdjacency& adj, std::int64_t edge_count) {
    if (adj.mode != NormMode::ColumnStochastic)
        throw InvalidArgumentError("push solver requires a column-stochastic operator");
    return PushOperator{&adj.entries, &adj.degrees, edge_count, 1};
}

PushOperator PushOperator::from(const HigherOrderAdjacency& adj) {
    return PushOperator{&adj.normalized, &adj.degrees, adj.simplex_count, adj.order};
}

void PushParams::validate() const {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw InvalidArgumentError("alpha must lie in (0, 1]");
    if (!(lambda > 0.0)) throw InvalidArgumentError("lambda must be positive");
    if (!(omega > 0.0) || !(omega < 2.0))
        throw InvalidArgumentError("omega must lie in (0, 2)");
    if (epoch_num < 1) throw InvalidArgumentError("epoch_num must be >= 1");
    if (epsilon && !(*epsilon > 0.0)) throw InvalidArgumentError("epsilon must be positive");
    if (scan_threshold && *scan_threshold < 0)
        throw InvalidArgumentError("scan_threshold must be nonnegative");
    if (max_sweeps_per_epoch < 1)
        throw InvalidArgumentError("max_sweeps_per_epoch must be >= 1");
}

double PushParams::effective_epsilon(std::int64_t m) const {
    return epsilon ? *epsilon : lambda / (10.0 * static_cast<double>(std::max<std::int64_t>(m, 1)));
}

std::int64_t PushParams::effective_scan_threshold(std::int64_t n) const {
    return scan_threshold ? *scan_threshold : n / 4;
}

namespace {

/// Mutable state for one single-source solve; all buffers are length n.
struct PushState {
    const PushOperator& op;
    Eigen::VectorXd pi;
    Eigen::VectorXd residual;
    double abs_sum = 0;    // running sum of |residual|, refreshed at exit checks
    double signed_sum = 0; // running sum of residual
    PushPhaseLog log;
    const PushObserver& observer;
    std::int64_t update_index = 0;

    PushState(const PushOperator& o, NodeId source, const PushObserver& obs)
        : op(o), pi(Eigen::VectorXd::Zero(o.size())), residual(Eigen::VectorXd::Zero(o.size())),
          observer(obs) {
        residual[source] = 1.0;
        abs_sum = 1.0;
        signed_sum = 1.0;
    }

    /// One SOR push from sigma: settle omega*alpha of the residual into the
    /// estimate, forward omega*(1-alpha) along the walk operator, keep the
    /// (1-omega) overshoot remainder in place. Running sums track every
    /// residual write so the loop tests stay O(1).
    template <typename OnTouch>
    void push(NodeId sigma, double alpha, double omega, OnTouch&& on_touch) {
        double r_old = residual[sigma];
        pi[sigma] += omega * alpha * r_old;
        double kept = (1.0 - omega) * r_old;
        abs_sum += std::abs(kept) - std::abs(r_old);
        signed_sum += kept - r_old;
        residual[sigma] = kept;
        double forward = omega * (1.0 - alpha) * r_old;
        if ((*op.degrees)[sigma] > 0 && forward != 0.0) {
            const auto& m = *op.matrix;
            for (Eigen::SparseMatrix<double>::InnerIterator it(m, sigma); it; ++it) {
                NodeId tau = static_cast<NodeId>(it.row());
                double before = residual[tau];
                double after = before + forward * it.value();
                abs_sum += std::abs(after) - std::abs(before);
                signed_sum += after - before;
                residual[tau] = after;
                ++log.push_edge_ops;
                on_touch(tau);
            }
        }
        if (observer) {
            observer(PushSnapshot{sigma,
                                  {pi.data(), static_cast<std::size_t>(pi.size())},
                                  {residual.data(), static_cast<std::size_t>(residual.size())},
                                  abs_sum,
                                  update_index});
        }
        ++update_index;
    }

    /// Replaces the drifting running sums with exact ones; called before any
    /// loop-exit decision so float drift can never fake convergence.
    void refresh_sums() {
        abs_sum = residual.cwiseAbs().sum();
        signed_sum = residual.sum();
    }
};

} // namespace

PprEstimate push_ppr_vector(const PushOperator& op, NodeId source, const PushParams& params,
                            const PushObserver& observer) {
    params.validate();
    const std::int64_t n = op.size();
    if (source < 0 || source >= n) throw BoundsError("source node out of range");
    const double alpha = params.alpha;
    const double omega = params.omega;
    const double lambda = params.lambda;
    const double eps = params.effective_epsilon(op.unit_count);
    const std::int64_t scan_threshold = params.effective_scan_threshold(n);
    const std::int64_t pop_cap =
        static_cast<std::int64_t>(params.max_sweeps_per_epoch) * std::max<std::int64_t>(n, 1);

    PushState st(op, source, observer);

    // alpha = 1 teleports every step: the fixed point is exactly e_source and
    // no forward mass ever moves, so skip the iteration instead of chasing the
    // (1-omega)^k residual tail toward it.
    if (alpha == 1.0) {
        PprEstimate est;
        est.source = source;
        st.pi[source] = 1.0;
        st.residual[source] = 0.0;
        est.pi_hat = std::move(st.pi);
        est.residual = std::move(st.residual);
        est.residual_sum = 0.0;
        est.abs_residual_sum = 0.0;
        return est;
    }

    // Phase 1: FIFO queue, one slot per node. The size bound is checked before
    // every pop, so a queue past the threshold hands off to the scan phase.
    {
        std::vector<NodeId> queue(static_cast<std::size_t>(n));
        std::vector<std::uint8_t> in_queue(static_cast<std::size_t>(n), 0);
        std::int64_t head = 0, tail = 0, size = 0;
        auto enqueue = [&](NodeId v) {
            if (in_queue[v]) return;
            in_queue[v] = 1;
            queue[tail] = v;
            tail = (tail + 1) % n;
            ++size;
        };
        enqueue(source);
        while (size > 0 && st.abs_sum > lambda) {
            bool within_budget = params.threshold_is_pop_budget
                                     ? st.log.queue_pops < scan_threshold
                                     : size <= scan_threshold;
            if (!within_budget) break;
            NodeId sigma = queue[head];
            head = (head + 1) % n;
            --size;
            in_queue[sigma] = 0;
            ++st.log.queue_pops;
            st.push(sigma, alpha, omega, enqueue);
            if (st.log.queue_pops > pop_cap) {
                st.refresh_sums();
                if (st.abs_sum > lambda)
                    throw ConvergenceError("queue phase exceeded " + std::to_string(pop_cap) +
                                           " pops with residual_sum " +
                                           format_double(st.abs_sum));
                break;
            }
        }
    }
    st.refresh_sums();

    // Phase 2: full sequential scans under epoch-wise tightening thresholds;
    // the final epoch's target is exactly lambda.
    if (st.abs_sum > lambda) {
        auto noop = [](NodeId) {};
        for (int epoch = 1; epoch <= params.epoch_num; ++epoch) {
            // m * r'_max with r'_max = lambda^(i/N) / m; the m cancels and the
            // last epoch's target is pinned to lambda itself.
            const double target =
                epoch == params.epoch_num
                    ? lambda
                    : std::pow(lambda, static_cast<double>(epoch) / params.epoch_num);
            int sweeps_this_epoch = 0;
            bool entered = false;
            while (true) {
                if (st.abs_sum <= target) {
                    st.refresh_sums();
                    if (st.abs_sum <= target) break;
                }
                if (++sweeps_this_epoch > params.max_sweeps_per_epoch)
                    throw ConvergenceError(
                        "scan phase exceeded " + std::to_string(params.max_sweeps_per_epoch) +
                        " sweeps in epoch " + std::to_string(epoch) + " with residual_sum " +
                        format_double(st.abs_sum));
                entered = true;
                ++st.log.scan_sweeps;
                std::int64_t pushed = 0;
                for (NodeId sigma = 0; sigma < n; ++sigma) {
                    double r = st.residual[sigma];
                    if (r != 0.0 && std::abs(r) >= eps * (*op.degrees)[sigma]) {
                        st.push(sigma, alpha, omega, noop);
                        ++pushed;
                    }
                }
                if (pushed == 0) {
                    st.refresh_sums();
                    if (st.abs_sum > target)
                        throw ConvergenceError(
                            "scan sweep made no progress (all residuals below the "
                            "activation threshold) with residual_sum " +
                            format_double(st.abs_sum));
                }
            }
            if (entered) ++st.log.epochs_entered;
        }
    }

    st.refresh_sums();
    // SOR overshoot can leave tiny negative estimate entries; the limit vector
    // is entrywise nonnegative, so clamping only shrinks the L1 error.
    for (std::int64_t i = 0; i < n; ++i)
        if (st.pi[i] < 0) st.pi[i] = 0;

    PprEstimate est;
    est.source = source;
    est.pi_hat = std::move(st.pi);
    est.residual = std::move(st.residual);
    est.residual_sum = st.signed_sum;
    est.abs_residual_sum = st.abs_sum;
    est.phase_log = st.log;
    return est;
}

PprMatrix exact_ppr_matrix(const PushOperator& op, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw InvalidArgumentError("alpha must lie in (0, 1]");
    const std::int64_t n = op.size();
    if (n > 20000)
        throw BoundsError("exact solver is limited to n <= 20000 (got " + std::to_string(n) + ")");
    if (n > 5000)
        std::cerr << "warning: exact PPR solve for n = " << n
                  << " nodes factorizes a large system; expect it to be slow\n";

    PprMatrix out;
    out.order = op.order;
    out.meta.alpha = alpha;
    out.meta.order = op.order;
    out.meta.solver = "exact";
    out.meta.drop_threshold = 0;

    if (alpha == 1.0) {
        Eigen::SparseMatrix<double> id(n, n);
        id.setIdentity();
        out.entries = std::move(id);
        return out;
    }

    Eigen::SparseMatrix<double> system(n, n);
    {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(static_cast<std::size_t>(op.matrix->nonZeros()) + n);
        for (std::int64_t c = 0; c < n; ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(*op.matrix, c); it; ++it)
                triplets.emplace_back(it.row(), c, -(1.0 - alpha) * it.value());
        for (std::int64_t i = 0; i < n; ++i) triplets.emplace_back(i, i, 1.0);
        system.setFromTriplets(triplets.begin(), triplets.end());
        system.makeCompressed();
    }

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(system);
    lu.factorize(system);
    if (lu.info() != Eigen::Success)
        throw NumericError("sparse LU factorization of (I - (1-alpha) A~) failed");

    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
    for (std::int64_t s = 0; s < n; ++s) {
        unit[s] = 1.0;
        Eigen::VectorXd column = alpha * lu.solve(unit);
        unit[s] = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            if (column[i] != 0.0) triplets.emplace_back(i, s, column[i]);
    }
    Eigen::SparseMatrix<double> entries(n, n);
    entries.setFromTriplets(triplets.begin(), triplets.end());
    entries.makeCompressed();
    out.entries = std::move(entries);
    return out;
}

PushMatrixResult push_ppr_matrix(const PushOperator& op, const PushParams& params,
                                 const MatrixBuildOptions& build) {
    params.validate();
    const std::int64_t n = op.size();
    if (build.drop_threshold < 0) throw InvalidArgumentError("drop_threshold must be >= 0");

    // Pruning adds up to n * drop L1 error per column, so the solver runs to a
    // tightened tolerance that keeps the combined error within params.lambda.
    double drop = build.drop_threshold;
    if (n > 0) drop = std::min(drop, params.lambda / (10.0 * static_cast<double>(n)));
    PushParams inner = params;
    inner.lambda = params.lambda - static_cast<double>(n) * drop;

    std::vector<std::vector<Eigen::Triplet<double>>> columns(static_cast<std::size_t>(n));
    std::vector<SourceDiagnostics> diags(
        build.collect_diagnostics ? static_cast<std::size_t>(n) : 0);
    std::vector<std::int64_t> edge_ops(static_cast<std::size_t>(n), 0);

    parallel_for(n, build.workers, [&](std::int64_t s) {
        Timer timer;
        PprEstimate est = push_ppr_vector(op, static_cast<NodeId>(s), inner);
        auto& col = columns[s];
        for (std::int64_t i = 0; i < n; ++i) {
            double v = est.pi_hat[i];
            if (v > 0 && v >= drop) col.emplace_back(i, s, v);
        }
        edge_ops[s] = est.phase_log.push_edge_ops;
        if (build.collect_diagnostics)
            diags[s] = SourceDiagnostics{static_cast<NodeId>(s), est.phase_log.queue_pops,
                                         est.phase_log.scan_sweeps, est.phase_log.push_edge_ops,
                                         est.abs_residual_sum, timer.milliseconds()};
    });

    std::vector<Eigen::Triplet<double>> all;
    std::size_t total = 0;
    for (const auto& col : columns) total += col.size();
    all.reserve(total);
    for (auto& col : columns) {
        all.insert(all.end(), col.begin(), col.end());
        col.clear();
        col.shrink_to_fit();
    }

    PushMatrixResult result;
    result.matrix.order = op.order;
    result.matrix.entries.resize(n, n);
    result.matrix.entries.setFromTriplets(all.begin(), all.end());
    result.matrix.entries.makeCompressed();
    result.matrix.meta = PprMeta{params.alpha,
                                 params.lambda,
                                 params.omega,
                                 inner.effective_epsilon(op.unit_count),
                                 op.order,
                                 drop,
                                 "push"};
    result.diagnostics = std::move(diags);
    for (std::int64_t ops : edge_ops) result.total_push_edge_ops += ops;
    return result;
}

void symmetrize(PprMatrix& ppr, const std::vector<double>& degrees) {
    const std::int64_t n = ppr.entries.cols();
    if (static_cast<std::int64_t>(degrees.size()) != n)
        throw DimensionError("degree vector length does not match PPR matrix size");
    std::vector<double> inv_sqrt(degrees.size(), 0.0);
    for (std::size_t i = 0; i < degrees.size(); ++i)
        if (degrees[i] > 0) inv_sqrt[i] = 1.0 / std::sqrt(degrees[i]);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(ppr.entries.nonZeros()));
    for (std::int64_t c = 0; c < n; ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(ppr.entries, c); it; ++it) {
            double v = it.value() * inv_sqrt[it.row()] * inv_sqrt[c];
            if (v != 0.0) triplets.emplace_back(it.row(), c, v);
        }
    Eigen::SparseMatrix<double> norm(n, n);
    norm.setFromTriplets(triplets.begin(), triplets.end());
    norm.makeCompressed();
    ppr.normalized = std::move(norm);
}

namespace {

void write_meta_header(std::ostream& out, const PprMatrix& ppr, bool normalized_field) {
    out << "# hpgnn-ppr v1\n";
    out << "# n " << ppr.entries.rows() << " order " << ppr.order << " solver "
        << ppr.meta.solver << "\n";
    out << "# alpha " << format_double(ppr.meta.alpha) << " lambda "
        << format_double(ppr.meta.lambda) << " omega " << format_double(ppr.meta.omega)
        << " epsilon " << format_double(ppr.meta.epsilon) << " drop "
        << format_double(ppr.meta.drop_threshold) << "\n";
    out << "# normalized " << (normalized_field ? 1 : 0) << "\n";
}

} // namespace

void save_ppr_text(const PprMatrix& ppr, const std::filesystem::path& path,
                   bool normalized_field) {
    const Eigen::SparseMatrix<double>& m = normalized_field ? ppr.normalized : ppr.entries;
    if (normalized_field && m.size() == 0)
        throw InvalidArgumentError("normalized field requested but not populated");
    std::ostringstream out;
    write_meta_header(out, ppr, normalized_field);
    for (std::int64_t c = 0; c < m.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it)
            out << it.row() << ' ' << c << ' ' << format_double(it.value()) << '\n';
    atomic_write_file(path, out.str());
}

PprMatrix load_ppr_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open PPR file " + path.string());
    PprMatrix ppr;
    std::int64_t n = -1;
    bool normalized_field = false;
    std::vector<Eigen::Triplet<double>> triplets;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.rfind("# hpgnn-ppr", 0) == 0) continue;
        if (line.rfind("# n ", 0) == 0) {
            std::istringstream hs(line.substr(4));
            std::string kw;
            if (!(hs >> n >> kw >> ppr.order) || kw != "order")
                throw ParseError(path.string() + ": bad size header");
            if (hs >> kw && kw == "solver") hs >> ppr.meta.solver;
            ppr.meta.order = ppr.order;
            continue;
        }
        if (line.rfind("# alpha ", 0) == 0) {
            std::istringstream hs(line.substr(2));
            std::string kw;
            hs >> kw >> ppr.meta.alpha;
            while (hs >> kw) {
                if (kw == "lambda") hs >> ppr.meta.lambda;
                else if (kw == "omega") hs >> ppr.meta.omega;
                else if (kw == "epsilon") hs >> ppr.meta.epsilon;
                else if (kw == "drop") hs >> ppr.meta.drop_threshold;
            }
            continue;
        }
        if (line.rfind("# normalized ", 0) == 0) {
            normalized_field = line.find('1') != std::string::npos;
            continue;
        }
        if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        std::int64_t i, j;
        double v;
        if (!(ls >> i >> j >> v))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 'row col value'");
        triplets.emplace_back(i, j, v);
    }
    if (n < 0) throw ParseError(path.string() + ": missing size header");
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    if (normalized_field)
        ppr.normalized = std::move(m);
    else
        ppr.entries = std::move(m);
    return ppr;
}

namespace {
constexpr char kPprMagic[6] = {'H', 'P', 'P', 'R', '1', '\n'};
}

void save_ppr_dense_binary(const PprMatrix& ppr, const std::filesystem::path& path) {
    const std::int64_t n = ppr.entries.rows();
    if (n > 5000) throw BoundsError("dense binary dump is limited to n <= 5000");
    std::string payload(kPprMagic, 6);
    auto put = [&](const void* p, std::size_t bytes) {
        payload.append(reinterpret_cast<const char*>(p), bytes);
    };
    put(&n, sizeof n);
    std::int32_t order = ppr.order;
    put(&order, sizeof order);
    put(&ppr.meta.alpha, sizeof(double));
    put(&ppr.meta.lambda, sizeof(double));
    put(&ppr.meta.omega, sizeof(double));
    put(&ppr.meta.epsilon, sizeof(double));
    put(&ppr.meta.drop_threshold, sizeof(double));
    std::int32_t solver_len = static_cast<std::int32_t>(ppr.meta.solver.size());
    put(&solver_len, sizeof solver_len);
    payload.append(ppr.meta.solver);
    std::uint8_t has_norm = ppr.normalized.size() != 0 ? 1 : 0;
    put(&has_norm, sizeof has_norm);
    Eigen::MatrixXd dense = Eigen::MatrixXd(ppr.entries);
    put(dense.data(), sizeof(double) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    if (has_norm) {
        Eigen::MatrixXd dense_norm = Eigen::MatrixXd(ppr.normalized);
        put(dense_norm.data(),
            sizeof(double) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    }
    atomic_write_file(path, payload);
}

PprMatrix load_ppr_dense_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PPR file " + path.string());
    char magic[6];
    if (!in.read(magic, 6) || !std::equal(magic, magic + 6, kPprMagic))
        throw ParseError(path.string() + ": bad PPR binary magic");
    auto get = [&](void* p, std::size_t bytes) {
        if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(bytes)))
            throw ParseError(path.string() + ": truncated PPR binary");
    };
    PprMatrix ppr;
    std::int64_t n = 0;
    get(&n, sizeof n);
    if (n < 0 || n > 5000) throw ParseError(path.string() + ": bad matrix size");
    std::int32_t order = 0;
    get(&order, sizeof order);
    ppr.order = order;
    get(&ppr.meta.alpha, sizeof(double));
    get(&ppr.meta.lambda, sizeof(double));
    get(&ppr.meta.omega, sizeof(double));
    get(&ppr.meta.epsilon, sizeof(double));
    get(&ppr.meta.drop_threshold, sizeof(double));
    ppr.meta.order = order;
    std::int32_t solver_len = 0;
    get(&solver_len, sizeof solver_len);
    if (solver_len < 0 || solver_len > 64) throw ParseError(path.string() + ": bad solver tag");
    ppr.meta.solver.resize(static_cast<std::size_t>(solver_len));
    if (solver_len) get(ppr.meta.solver.data(), static_cast<std::size_t>(solver_len));
    std::uint8_t has_norm = 0;
    get(&has_norm, sizeof has_norm);
    Eigen::MatrixXd dense(n, n);
    get(dense.data(), sizeof(double) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    ppr.entries = dense.sparseView(0.0, 0.0);
    ppr.entries.makeCompressed();
    if (has_norm) {
        get(dense.data(),
            sizeof(double) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
        ppr.normalized = dense.sparseView(0.0, 0.0);
        ppr.normalized.makeCompressed();
    }
    return ppr;
}

void save_diagnostics(const std::vector<SourceDiagnostics>& diags,
                      const std::filesystem::path& path) {
    std::ostringstream out;
    out << "source,pops,sweeps,push_edge_ops,residual_sum,wall_ms\n";
    for (const auto& d : diags)
        out << d.source << ',' << d.pops << ',' << d.sweeps << ',' << d.push_edge_ops << ','
            << format_double(d.residual_sum) << ',' << format_double(d.wall_ms) << '\n';
    atomic_write_file(path, out.str());
}

} // namespace hpgnn
