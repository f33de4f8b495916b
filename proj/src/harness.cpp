#include "hpgnn/harness.hpp"
#include "hpgnn/complex.hpp"
#include "hpgnn/errors.hpp"
#include "hpgnn/graph_io.hpp"
#include "hpgnn/util.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <sys/resource.h>

namespace hpgnn {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
    if (dataset.empty()) throw InvalidArgumentError("dataset path is required");
    if (max_order < 1) throw InvalidArgumentError("max_order must be >= 1");
    if (hops < 0) throw InvalidArgumentError("hops must be >= 0");
    if (!(alpha > 0.0) || alpha > 1.0) throw InvalidArgumentError("alpha must lie in (0, 1]");
    if (!(lambda > 0.0)) throw InvalidArgumentError("lambda must be positive");
    if (!(omega > 0.0) || !(omega < 2.0)) throw InvalidArgumentError("omega must lie in (0, 2)");
    if (epsilon && !(*epsilon > 0.0)) throw InvalidArgumentError("epsilon must be positive");
    if (drop_threshold < 0.0) throw InvalidArgumentError("drop_threshold must be >= 0");
    if (operator_mode != "ppr" && operator_mode != "sym_adj")
        throw InvalidArgumentError("operator_mode must be 'ppr' or 'sym_adj'");
    if (solver != "push" && solver != "exact")
        throw InvalidArgumentError("solver must be 'push' or 'exact'");
    if (!(lr > 0.0)) throw InvalidArgumentError("lr must be positive");
    if (weight_decay < 0.0) throw InvalidArgumentError("weight_decay must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw InvalidArgumentError("momentum must lie in [0, 1)");
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgumentError("dropout must lie in [0, 1)");
    if (hidden < 1) throw InvalidArgumentError("hidden must be >= 1");
    if (patience < 1) throw InvalidArgumentError("patience must be >= 1");
    if (max_epochs < 1) throw InvalidArgumentError("max_epochs must be >= 1");
    if (optimizer != "sgd_momentum")
        throw InvalidArgumentError("optimizer must be 'sgd_momentum'");
    if (train_fraction <= 0.0 || val_fraction < 0.0 || test_fraction < 0.0)
        throw InvalidArgumentError("split fractions must be nonnegative with positive train");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw InvalidArgumentError("split fractions must sum to 1");
    if (num_splits < 1) throw InvalidArgumentError("num_splits must be >= 1");
    if (runs_per_split < 1) throw InvalidArgumentError("runs_per_split must be >= 1");
    if (workers < 1) throw InvalidArgumentError("workers must be >= 1");
    if (out_dir.empty()) throw InvalidArgumentError("out_dir is required");
}

json ExperimentConfig::to_json() const {
    json j;
    j["dataset"] = dataset;
    j["max_order"] = max_order;
    j["hops"] = hops;
    j["alpha"] = alpha;
    j["lambda"] = lambda;
    j["omega"] = omega;
    j["epsilon"] = epsilon ? json(*epsilon) : json(nullptr);
    j["drop_threshold"] = drop_threshold;
    j["binarize"] = binarize;
    j["operator_mode"] = operator_mode;
    j["solver"] = solver;
    j["lr"] = lr;
    j["weight_decay"] = weight_decay;
    j["momentum"] = momentum;
    j["dropout"] = dropout;
    j["hidden"] = hidden;
    j["patience"] = patience;
    j["max_epochs"] = max_epochs;
    j["optimizer"] = optimizer;
    j["train_fraction"] = train_fraction;
    j["val_fraction"] = val_fraction;
    j["test_fraction"] = test_fraction;
    j["stratified"] = stratified;
    j["num_splits"] = num_splits;
    j["runs_per_split"] = runs_per_split;
    j["seed"] = seed;
    j["workers"] = workers;
    j["out_dir"] = out_dir;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
        if (j.contains("max_order")) c.max_order = j["max_order"].get<int>();
        if (j.contains("hops")) c.hops = j["hops"].get<int>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
        if (j.contains("omega")) c.omega = j["omega"].get<double>();
        if (j.contains("epsilon") && !j["epsilon"].is_null())
            c.epsilon = j["epsilon"].get<double>();
        if (j.contains("drop_threshold")) c.drop_threshold = j["drop_threshold"].get<double>();
        if (j.contains("binarize")) c.binarize = j["binarize"].get<bool>();
        if (j.contains("operator_mode")) c.operator_mode = j["operator_mode"].get<std::string>();
        if (j.contains("solver")) c.solver = j["solver"].get<std::string>();
        if (j.contains("lr")) c.lr = j["lr"].get<double>();
        if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
        if (j.contains("momentum")) c.momentum = j["momentum"].get<double>();
        if (j.contains("dropout")) c.dropout = j["dropout"].get<double>();
        if (j.contains("hidden")) c.hidden = j["hidden"].get<int>();
        if (j.contains("patience")) c.patience = j["patience"].get<int>();
        if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<int>();
        if (j.contains("optimizer")) c.optimizer = j["optimizer"].get<std::string>();
        if (j.contains("train_fraction")) c.train_fraction = j["train_fraction"].get<double>();
        if (j.contains("val_fraction")) c.val_fraction = j["val_fraction"].get<double>();
        if (j.contains("test_fraction")) c.test_fraction = j["test_fraction"].get<double>();
        if (j.contains("stratified")) c.stratified = j["stratified"].get<bool>();
        if (j.contains("num_splits")) c.num_splits = j["num_splits"].get<int>();
        if (j.contains("runs_per_split")) c.runs_per_split = j["runs_per_split"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("workers")) c.workers = j["workers"].get<int>();
        if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad experiment config: ") + e.what());
    }
    return c;
}

std::string ExperimentConfig::cache_key() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(to_json().dump())));
    return buf;
}

json RunReport::to_json(bool include_timing) const {
    json j;
    j["config"] = config.to_json();
    json runs_j = json::array();
    for (const auto& r : runs) {
        json rj;
        rj["split"] = r.split;
        rj["run"] = r.run;
        rj["test_acc"] = r.test_acc;
        rj["best_val_acc"] = r.best_val_acc;
        rj["epochs"] = r.epochs;
        rj["best_epoch"] = r.best_epoch;
        if (include_timing) rj["wall_seconds"] = r.wall_seconds;
        runs_j.push_back(std::move(rj));
    }
    j["runs"] = runs_j;
    j["mean_test_acc"] = mean_test_acc;
    j["ci95_half_width"] = ci95_half_width;
    j["sample_size"] = sample_size;
    j["peak_memory_mb_estimate"] = peak_memory_mb_estimate;
    // Cache-hit state is environmental, like timing: a repeat invocation hits
    // the cache the first one populated, so it stays out of the deterministic
    // payload.
    if (include_timing) {
        j["ppr_cache_hit"] = ppr_cache_hit;
        j["ppr_stage_seconds"] = ppr_stage_seconds;
        j["mean_epoch_ms"] = mean_epoch_ms;
        j["total_seconds"] = total_seconds;
        j["max_rss_mb"] = max_rss_mb;
    }
    return j;
}

namespace {

/// Hamilton (largest remainder) apportionment of `total` over real quotas.
std::vector<std::int64_t> hamilton(const std::vector<double>& quotas, std::int64_t total) {
    std::vector<std::int64_t> out(quotas.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < quotas.size(); ++i) {
        out[i] = static_cast<std::int64_t>(std::floor(quotas[i]));
        assigned += out[i];
        remainders.emplace_back(quotas[i] - static_cast<double>(out[i]), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::int64_t k = 0; k < total - assigned; ++k)
        ++out[remainders[static_cast<std::size_t>(k) % remainders.size()].second];
    return out;
}

} // namespace

std::vector<SplitMasks> make_splits(std::int64_t n, const std::vector<int>& labels,
                                    double train_fraction, double val_fraction,
                                    double test_fraction, int num_splits, std::uint64_t seed,
                                    bool stratified) {
    if (n < 1) throw InvalidArgumentError("need at least one node to split");
    if (num_splits < 1) throw InvalidArgumentError("num_splits must be >= 1");
    const double fracs[3] = {train_fraction, val_fraction, test_fraction};
    if (fracs[0] <= 0 || fracs[1] < 0 || fracs[2] < 0)
        throw InvalidArgumentError("split fractions must be nonnegative with positive train");
    if (std::abs(fracs[0] + fracs[1] + fracs[2] - 1.0) > 1e-9)
        throw InvalidArgumentError("split fractions must sum to 1");

    std::vector<std::int64_t> global =
        hamilton({n * fracs[0], n * fracs[1], n * fracs[2]}, n);

    int positive_parts = 0;
    for (double f : fracs)
        if (f > 0) ++positive_parts;

    std::vector<std::vector<NodeId>> by_class;
    if (stratified) {
        if (static_cast<std::int64_t>(labels.size()) != n)
            throw StratificationError("stratified splits require one label per node");
        int num_classes = 0;
        for (int y : labels) {
            if (y < 0) throw StratificationError("negative class id in label vector");
            num_classes = std::max(num_classes, y + 1);
        }
        by_class.resize(static_cast<std::size_t>(num_classes));
        for (std::int64_t i = 0; i < n; ++i)
            by_class[labels[i]].push_back(static_cast<NodeId>(i));
        for (std::size_t c = 0; c < by_class.size(); ++c)
            if (!by_class[c].empty() &&
                static_cast<int>(by_class[c].size()) < positive_parts)
                throw StratificationError("class " + std::to_string(c) + " has only " +
                                          std::to_string(by_class[c].size()) +
                                          " members, fewer than the " +
                                          std::to_string(positive_parts) +
                                          " populated split parts");
        std::erase_if(by_class, [](const auto& v) { return v.empty(); });
    }

    std::vector<SplitMasks> result;
    result.reserve(static_cast<std::size_t>(num_splits));
    for (int s = 0; s < num_splits; ++s) {
        std::mt19937_64 rng(split_seed(seed, static_cast<std::uint64_t>(s)));
        SplitMasks masks;
        if (!stratified) {
            std::vector<NodeId> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            masks.train.assign(order.begin(), order.begin() + global[0]);
            masks.val.assign(order.begin() + global[0], order.begin() + global[0] + global[1]);
            masks.test.assign(order.begin() + global[0] + global[1], order.end());
        } else {
            // Per-class Hamilton apportionment keeps every class within +-1 of
            // its proportional share; the repair loop then moves single units
            // between parts until the global sizes are exact, preferring the
            // most over-allocated donor cells so per-class quality survives.
            std::size_t num_classes = by_class.size();
            std::vector<std::array<double, 3>> quota(num_classes);
            std::vector<std::array<std::int64_t, 3>> alloc(num_classes);
            std::array<std::int64_t, 3> col_sum = {0, 0, 0};
            for (std::size_t c = 0; c < num_classes; ++c) {
                double m = static_cast<double>(by_class[c].size());
                quota[c] = {m * fracs[0], m * fracs[1], m * fracs[2]};
                auto a = hamilton({quota[c][0], quota[c][1], quota[c][2]},
                                  static_cast<std::int64_t>(by_class[c].size()));
                alloc[c] = {a[0], a[1], a[2]};
                for (int j = 0; j < 3; ++j) col_sum[j] += a[j];
            }
            while (true) {
                int surplus = -1, deficit = -1;
                for (int j = 0; j < 3; ++j) {
                    if (col_sum[j] > global[j] && surplus < 0) surplus = j;
                    if (col_sum[j] < global[j] && deficit < 0) deficit = j;
                }
                if (surplus < 0 && deficit < 0) break;
                double best_score = -1e300;
                std::size_t best_class = num_classes;
                for (std::size_t c = 0; c < num_classes; ++c) {
                    if (alloc[c][surplus] < 1) continue;
                    double score = (static_cast<double>(alloc[c][surplus]) - quota[c][surplus]) -
                                   (static_cast<double>(alloc[c][deficit]) - quota[c][deficit]);
                    if (score > best_score) {
                        best_score = score;
                        best_class = c;
                    }
                }
                if (best_class == num_classes)
                    throw InternalError("split repair found no movable class");
                --alloc[best_class][surplus];
                ++alloc[best_class][deficit];
                --col_sum[surplus];
                ++col_sum[deficit];
            }
            for (std::size_t c = 0; c < num_classes; ++c) {
                std::vector<NodeId> members = by_class[c];
                std::shuffle(members.begin(), members.end(), rng);
                auto it = members.begin();
                masks.train.insert(masks.train.end(), it, it + alloc[c][0]);
                it += alloc[c][0];
                masks.val.insert(masks.val.end(), it, it + alloc[c][1]);
                it += alloc[c][1];
                masks.test.insert(masks.test.end(), it, members.end());
            }
        }
        std::sort(masks.train.begin(), masks.train.end());
        std::sort(masks.val.begin(), masks.val.end());
        std::sort(masks.test.begin(), masks.test.end());
        result.push_back(std::move(masks));
    }
    return result;
}

Eigen::SparseMatrix<double> sym_normalized_self_loops(const Eigen::SparseMatrix<double>& counts) {
    const std::int64_t n = counts.rows();
    if (counts.cols() != n) throw DimensionError("adjacency must be square");
    Eigen::SparseMatrix<double> id(n, n);
    id.setIdentity();
    Eigen::SparseMatrix<double> loops = counts + id;
    std::vector<double> inv_sqrt(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t c = 0; c < n; ++c) {
        double sum = 0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(loops, c); it; ++it)
            sum += it.value();
        inv_sqrt[c] = 1.0 / std::sqrt(sum); // >= 1 from the self loop
    }
    for (std::int64_t c = 0; c < n; ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(loops, c); it; ++it)
            it.valueRef() *= inv_sqrt[it.row()] * inv_sqrt[c];
    loops.makeCompressed();
    return loops;
}

namespace {

constexpr char kOperatorMagic[6] = {'H', 'P', 'O', 'P', '1', '\n'};

void save_operator_binary(const Eigen::SparseMatrix<double>& m, const fs::path& path) {
    std::string payload(kOperatorMagic, 6);
    auto put = [&](const void* p, std::size_t bytes) {
        payload.append(reinterpret_cast<const char*>(p), bytes);
    };
    std::int64_t rows = m.rows(), cols = m.cols(), nnz = m.nonZeros();
    put(&rows, sizeof rows);
    put(&cols, sizeof cols);
    put(&nnz, sizeof nnz);
    for (std::int64_t c = 0; c < m.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) {
            std::int64_t r = it.row(), cc = c;
            double v = it.value();
            put(&r, sizeof r);
            put(&cc, sizeof cc);
            put(&v, sizeof v);
        }
    atomic_write_file(path, payload);
}

Eigen::SparseMatrix<double> load_operator_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open cached operator " + path.string());
    char magic[6];
    if (!in.read(magic, 6) || !std::equal(magic, magic + 6, kOperatorMagic))
        throw ParseError(path.string() + ": bad operator magic");
    auto get = [&](void* p, std::size_t bytes) {
        if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(bytes)))
            throw ParseError(path.string() + ": truncated operator file");
    };
    std::int64_t rows = 0, cols = 0, nnz = 0;
    get(&rows, sizeof rows);
    get(&cols, sizeof cols);
    get(&nnz, sizeof nnz);
    if (rows < 0 || cols < 0 || nnz < 0) throw ParseError(path.string() + ": bad header");
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(nnz));
    for (std::int64_t k = 0; k < nnz; ++k) {
        std::int64_t r, c;
        double v;
        get(&r, sizeof r);
        get(&c, sizeof c);
        get(&v, sizeof v);
        triplets.emplace_back(r, c, v);
    }
    Eigen::SparseMatrix<double> m(rows, cols);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

Eigen::SparseMatrix<double> binary_adjacency(const Graph& g) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(g.num_edge_endpoints()));
    for (const auto& [u, v] : g.edges) {
        triplets.emplace_back(u, v, 1.0);
        triplets.emplace_back(v, u, 1.0);
    }
    Eigen::SparseMatrix<double> a(g.n, g.n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string("stage ") + stage + ": " + e.what());
    }
}

} // namespace

OperatorBundle build_operators(const Graph& g, const ExperimentConfig& config, bool use_cache) {
    Timer timer;
    OperatorBundle bundle;
    const int P = config.max_order;
    fs::path cache_dir = fs::path(config.out_dir) / "cache" / config.cache_key();
    fs::path marker = cache_dir / "complete";

    if (use_cache && fs::exists(marker)) {
        bool ok = true;
        std::vector<Eigen::SparseMatrix<double>> ops;
        for (int p = 1; p <= P && ok; ++p) {
            fs::path f = cache_dir / ("op_p" + std::to_string(p) + ".bin");
            if (!fs::exists(f)) {
                ok = false;
                break;
            }
            ops.push_back(load_operator_binary(f));
        }
        if (ok) {
            bundle.operators = std::move(ops);
            bundle.cache_hit = true;
            for (const auto& m : bundle.operators) bundle.total_nnz += m.nonZeros();
            bundle.stage_seconds = timer.seconds();
            return bundle;
        }
    }

    SimplicialComplex sc =
        run_stage("lift", [&] { return enumerate_cliques(g, P); });
    NormalizedAdjacency walk1;
    if (config.operator_mode == "ppr") walk1 = normalize(g, NormMode::ColumnStochastic);

    for (int p = 1; p <= P; ++p) {
        Eigen::SparseMatrix<double> op;
        if (config.operator_mode == "sym_adj") {
            Eigen::SparseMatrix<double> counts =
                p == 1 ? binary_adjacency(g)
                       : run_stage("higher_adjacency",
                                   [&] { return higher_adjacency(sc, p, config.binarize); })
                             .counts;
            op = sym_normalized_self_loops(counts);
        } else {
            HigherOrderAdjacency hoa;
            PushOperator push_op;
            const std::vector<double>* degrees;
            if (p == 1) {
                push_op = PushOperator::from(walk1, g.num_undirected_edges());
                degrees = &walk1.degrees;
            } else {
                hoa = run_stage("higher_adjacency",
                                [&] { return higher_adjacency(sc, p, config.binarize); });
                push_op = PushOperator::from(hoa);
                degrees = &hoa.degrees;
            }
            PprMatrix ppr;
            if (config.solver == "exact") {
                ppr = run_stage("exact_ppr",
                                [&] { return exact_ppr_matrix(push_op, config.alpha); });
            } else {
                PushParams params;
                params.alpha = config.alpha;
                params.lambda = config.lambda;
                params.omega = config.omega;
                params.epsilon = config.epsilon;
                MatrixBuildOptions build;
                build.drop_threshold = config.drop_threshold;
                build.workers = config.workers;
                ppr = run_stage("push_ppr", [&] {
                          return push_ppr_matrix(push_op, params, build);
                      }).matrix;
            }
            run_stage("symmetrize", [&] {
                symmetrize(ppr, *degrees);
                return 0;
            });
            op = std::move(ppr.normalized);
        }
        bundle.total_nnz += op.nonZeros();
        bundle.operators.push_back(std::move(op));
    }

    if (use_cache) {
        fs::create_directories(cache_dir);
        for (int p = 1; p <= P; ++p)
            save_operator_binary(bundle.operators[p - 1],
                                 cache_dir / ("op_p" + std::to_string(p) + ".bin"));
        atomic_write_file(marker, config.to_json().dump(2) + "\n");
    }
    bundle.stage_seconds = timer.seconds();
    return bundle;
}

namespace {

Graph load_dataset(const std::string& path) {
    fs::path p(path);
    if (!fs::exists(p)) throw IoError("dataset not found: " + path);
    if (p.extension() == ".json") return load_bundle(p);
    return load_graph(p);
}

double t_interval_half_width(const std::vector<double>& sample) {
    if (sample.size() < 2) return 0.0;
    double n = static_cast<double>(sample.size());
    double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
    double ss = 0;
    for (double x : sample) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) return 0.0;
    boost::math::students_t dist(n - 1.0);
    double t = boost::math::quantile(dist, 0.975);
    return t * sd / std::sqrt(n);
}

double peak_memory_estimate_mb(std::int64_t n, std::int64_t feat, std::int64_t hidden,
                               std::int64_t classes, int P, int K, std::int64_t total_nnz) {
    // Dominant allocations: cached sparse operators (CSC: 8-byte value +
    // 4-byte inner index per entry, 4-byte outer starts), the feature matrix,
    // the propagation stack kept for backprop, concat/logit activations, and
    // two copies of the parameters (values + velocity).
    double ops = static_cast<double>(total_nnz) * 12.0 + static_cast<double>(P) * (n + 1) * 4.0;
    double features = static_cast<double>(n) * feat * 8.0;
    double stack = static_cast<double>(P) * (K + 1) * n * hidden * 8.0;
    double activations = static_cast<double>(n) * (P * hidden + classes + P * hidden) * 8.0;
    double params = (static_cast<double>(P) * (K + 1) + static_cast<double>(P) * feat * hidden +
                     static_cast<double>(P) * hidden * classes) *
                    8.0 * 2.0;
    return (ops + features + stack + activations + params) / 1e6;
}

double current_max_rss_mb() {
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return static_cast<double>(usage.ru_maxrss) / 1024.0; // Linux reports KiB
}

} // namespace

RunReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    Timer total_timer;

    Graph g = run_stage("load", [&] { return load_dataset(config.dataset); });
    if (!g.has_features())
        throw MissingDataError("stage load: dataset has no feature matrix; training requires one");
    if (!g.has_labels())
        throw MissingDataError("stage load: dataset has no labels; training requires them");

    OperatorBundle bundle = build_operators(g, config, true);
    OperatorSet operators;
    for (const auto& m : bundle.operators) operators.push_back(&m);

    std::vector<SplitMasks> splits = run_stage("split", [&] {
        return make_splits(g.n, g.labels, config.train_fraction, config.val_fraction,
                           config.test_fraction, config.num_splits, config.seed,
                           config.stratified);
    });

    const int classes = g.num_classes();
    RunReport report;
    report.config = config;
    report.ppr_cache_hit = bundle.cache_hit;
    report.ppr_stage_seconds = bundle.stage_seconds;

    HistoryLog history_log;
    double total_epoch_seconds = 0;
    std::int64_t total_epochs = 0;
    double best_overall_val = -1.0;
    HpgnnModel best_overall;
    bool have_best = false;

    for (int s = 0; s < config.num_splits; ++s) {
        for (int r = 0; r < config.runs_per_split; ++r) {
            Timer run_timer;
            std::uint64_t run_seed = split_seed(
                config.seed, 1000003ull + static_cast<std::uint64_t>(s) * config.runs_per_split +
                                 static_cast<std::uint64_t>(r));
            HpgnnModel model =
                HpgnnModel::init(config.max_order, config.hops, g.num_features(), config.hidden,
                                 classes, config.alpha, run_seed, config.dropout);
            TrainConfig tc;
            tc.lr = config.lr;
            tc.weight_decay = config.weight_decay;
            tc.momentum = config.momentum;
            tc.max_epochs = config.max_epochs;
            tc.patience = config.patience;
            tc.seed = run_seed;
            TrainResult res = run_stage("train", [&] {
                return train(std::move(model), g.features, operators, g.labels, splits[s], tc);
            });

            RunRecord rec;
            rec.split = s;
            rec.run = r;
            rec.test_acc = res.test_acc;
            rec.best_val_acc = res.best_val_acc;
            rec.epochs = static_cast<int>(res.history.size());
            rec.best_epoch = res.best_epoch;
            rec.wall_seconds = run_timer.seconds();
            report.runs.push_back(rec);

            total_epoch_seconds += rec.wall_seconds;
            total_epochs += rec.epochs;
            for (const auto& h : res.history)
                history_log.rows.push_back({s, r, h.epoch, h.train_loss, h.train_acc, h.val_acc,
                                            h.test_acc});
            if (res.best_val_acc > best_overall_val) {
                best_overall_val = res.best_val_acc;
                best_overall = res.model;
                have_best = true;
            }
        }
    }

    std::vector<double> accs;
    accs.reserve(report.runs.size());
    for (const auto& r : report.runs) accs.push_back(r.test_acc);
    report.sample_size = static_cast<int>(accs.size());
    report.mean_test_acc =
        std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    report.ci95_half_width = t_interval_half_width(accs);
    report.mean_epoch_ms =
        total_epochs > 0 ? total_epoch_seconds * 1e3 / static_cast<double>(total_epochs) : 0;
    report.peak_memory_mb_estimate =
        peak_memory_estimate_mb(g.n, g.num_features(), config.hidden, classes, config.max_order,
                                config.hops, bundle.total_nnz);
    report.max_rss_mb = current_max_rss_mb();
    report.total_seconds = total_timer.seconds();

    fs::path out(config.out_dir);
    fs::create_directories(out);
    save_report(report, out / "report.json");
    save_history_log(history_log, out / "history.csv");
    save_aggregate_csv(report, out / "aggregate.csv");
    if (have_best) save_checkpoint(best_overall, out / "checkpoint.json");
    return report;
}

void save_report(const RunReport& report, const fs::path& path) {
    atomic_write_file(path, report.to_json(true).dump(2) + "\n");
}

void save_aggregate_csv(const RunReport& report, const fs::path& path) {
    std::ostringstream out;
    out << "dataset,variant,mean_test_acc,ci95_half_width,sample_size\n";
    std::string variant = report.config.operator_mode + "_P" +
                          std::to_string(report.config.max_order) + "_K" +
                          std::to_string(report.config.hops);
    out << report.config.dataset << ',' << variant << ','
        << format_double(report.mean_test_acc) << ',' << format_double(report.ci95_half_width)
        << ',' << report.sample_size << '\n';
    atomic_write_file(path, out.str());
}

void save_history_log(const HistoryLog& log, const fs::path& path) {
    std::ostringstream out;
    out << "split,run,epoch,train_loss,train_acc,val_acc,test_acc\n";
    for (const auto& r : log.rows)
        out << r.split << ',' << r.run << ',' << r.epoch << ',' << format_double(r.train_loss)
            << ',' << format_double(r.train_acc) << ',' << format_double(r.val_acc) << ','
            << format_double(r.test_acc) << '\n';
    atomic_write_file(path, out.str());
}

const std::vector<DatasetExpectation>& known_dataset_expectations() {
    static const std::vector<DatasetExpectation> table = {
        {"cora", 2708, 10556, 1433, 6, 1630, 0.810},
        {"citeseer", 3327, 9104, 3703, 7, 1167, 0.736},
        {"photo", 7650, 119081, 745, 8, 717400, 0.827},
        {"cornell", 183, 298, 1703, 5, 59, 0.127},
        {"actor", 7600, 29926, 931, 5, 7121, 0.219},
        {"texas", 183, 309, 1703, 5, 67, 0.087},
        {"wisconsin", 251, 499, 1703, 5, 118, 0.192},
    };
    return table;
}

json SanityReport::to_json() const {
    json j;
    j["dataset"] = dataset;
    j["nodes"] = nodes;
    j["undirected_edges"] = undirected_edges;
    j["edge_endpoints"] = edge_endpoints;
    j["features"] = features;
    j["classes"] = classes;
    j["triangles"] = triangles;
    j["homophily"] = homophily;
    if (expected) {
        json e;
        e["name"] = expected->name;
        e["nodes"] = expected->nodes;
        e["edge_endpoints"] = expected->edge_endpoints;
        e["features"] = expected->features;
        e["classes"] = expected->classes;
        e["triangles"] = expected->triangles;
        e["homophily"] = expected->homophily;
        j["expected"] = e;
    } else {
        j["expected"] = nullptr;
    }
    j["flags"] = flags;
    j["clean"] = clean();
    return j;
}

SanityReport dataset_sanity(const fs::path& dataset_path) {
    SanityReport report;
    report.dataset = dataset_path.string();

    Graph g = run_stage("load", [&] { return load_dataset(dataset_path.string()); });
    report.nodes = g.n;
    report.undirected_edges = g.num_undirected_edges();
    report.edge_endpoints = g.num_edge_endpoints();
    report.features = g.has_features() ? g.num_features() : 0;
    report.classes = g.has_labels() ? g.num_classes() : 0;
    SimplicialComplex sc = run_stage("lift", [&] { return enumerate_cliques(g, 2); });
    report.triangles = sc.simplex_count(2);
    if (g.has_labels()) report.homophily = node_homophily(g);

    std::string stem = dataset_path.filename().string();
    std::transform(stem.begin(), stem.end(), stem.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto& row : known_dataset_expectations()) {
        if (stem.find(row.name) != std::string::npos) {
            report.expected = row;
            break;
        }
    }

    if (report.expected) {
        const auto& e = *report.expected;
        auto flag = [&](const std::string& msg) { report.flags.push_back(msg); };
        if (report.nodes != e.nodes)
            flag("nodes: got " + std::to_string(report.nodes) + ", expected " +
                 std::to_string(e.nodes));
        if (report.edge_endpoints != e.edge_endpoints)
            flag("edge_endpoints: got " + std::to_string(report.edge_endpoints) + ", expected " +
                 std::to_string(e.edge_endpoints));
        if (report.features != e.features)
            flag("features: got " + std::to_string(report.features) + ", expected " +
                 std::to_string(e.features));
        if (report.classes != e.classes)
            flag("classes: got " + std::to_string(report.classes) + ", expected " +
                 std::to_string(e.classes));
        if (report.triangles != e.triangles)
            flag("triangles: got " + std::to_string(report.triangles) + ", expected " +
                 std::to_string(e.triangles));
        if (report.homophily >= 0 && std::abs(report.homophily - e.homophily) > 0.01)
            flag("homophily: got " + format_double(report.homophily) + ", expected " +
                 format_double(e.homophily) + " +- 0.01");
    }
    return report;
}

} // namespace hpgnn
