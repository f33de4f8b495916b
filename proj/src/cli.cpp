#include "hpgnn/cli.hpp"
#include "hpgnn/complex.hpp"
#include "hpgnn/errors.hpp"
#include "hpgnn/graph_io.hpp"
#include "hpgnn/harness.hpp"
#include "hpgnn/model.hpp"
#include "hpgnn/ppr.hpp"
#include "hpgnn/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace hpgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliState {
    ExperimentConfig cfg;
    std::string edge_file;
    std::string features;
    std::string labels;
    std::string config_file;
    std::string out_path;   // artifact override for lift/stats/ppr
    std::string checkpoint; // eval input
    double epsilon_flag = -1;
    std::int64_t simplex_cap = kDefaultSimplexCap;
};

void add_input_flags(CLI::App* sub, CliState& st) {
    sub->add_option("--edge-file", st.edge_file, "Edge-list file ('u v' per line, '#' comments)");
    sub->add_option("--features", st.features, "Feature matrix file (text or binary)");
    sub->add_option("--labels", st.labels, "Label file (one class id per line)");
    sub->add_option("--dataset", st.cfg.dataset,
                    "Dataset bundle manifest (.json) or bare edge-list file");
}

void add_solver_flags(CLI::App* sub, CliState& st) {
    sub->add_option("--max-order", st.cfg.max_order,
                    "Highest simplex order P (1 = edges only)")
        ->capture_default_str();
    sub->add_option("--alpha", st.cfg.alpha, "Teleport probability in (0, 1]")
        ->capture_default_str();
    sub->add_option("--lambda", st.cfg.lambda, "Residual tolerance for the push solver")
        ->capture_default_str();
    sub->add_option("--omega", st.cfg.omega, "SOR relaxation factor in (0, 2)")
        ->capture_default_str();
    sub->add_option("--epsilon", st.epsilon_flag,
                    "Scan-phase activation threshold (default lambda / (10 m))");
    sub->add_option("--drop-threshold", st.cfg.drop_threshold,
                    "Prune PPR entries below this value")
        ->capture_default_str();
    sub->add_flag("--binarize", st.cfg.binarize,
                  "Binarize higher-order co-membership counts");
    sub->add_option("--solver", st.cfg.solver, "PPR solver: push or exact")
        ->capture_default_str();
    sub->add_option("--workers", st.cfg.workers, "Worker thread cap")->capture_default_str();
    sub->add_option("--seed", st.cfg.seed, "Master seed for all randomness")
        ->capture_default_str();
    sub->add_option("--out-dir", st.cfg.out_dir, "Artifact output directory")
        ->capture_default_str();
    sub->add_option("--config", st.config_file,
                    "JSON config file; its fields override the flags");
}

void add_train_flags(CLI::App* sub, CliState& st) {
    sub->add_option("--hops", st.cfg.hops, "Polynomial filter hop count K")
        ->capture_default_str();
    sub->add_option("--operator-mode", st.cfg.operator_mode,
                    "Propagation operator: ppr or sym_adj")
        ->capture_default_str();
    sub->add_option("--lr", st.cfg.lr, "Learning rate")->capture_default_str();
    sub->add_option("--wd", st.cfg.weight_decay, "Weight decay")->capture_default_str();
    sub->add_option("--momentum", st.cfg.momentum, "SGD momentum")->capture_default_str();
    sub->add_option("--dropout", st.cfg.dropout, "Input feature dropout rate")
        ->capture_default_str();
    sub->add_option("--hidden", st.cfg.hidden, "Hidden width h")->capture_default_str();
    sub->add_option("--patience", st.cfg.patience, "Early-stopping patience (epochs)")
        ->capture_default_str();
    sub->add_option("--max-epochs", st.cfg.max_epochs, "Maximum training epochs")
        ->capture_default_str();
    sub->add_option("--train-frac", st.cfg.train_fraction, "Training fraction")
        ->capture_default_str();
    sub->add_option("--val-frac", st.cfg.val_fraction, "Validation fraction")
        ->capture_default_str();
    sub->add_option("--test-frac", st.cfg.test_fraction, "Test fraction")
        ->capture_default_str();
    sub->add_flag("--stratified,!--no-stratified", st.cfg.stratified,
                  "Stratify splits by label (default on)");
    sub->add_option("--num-splits", st.cfg.num_splits, "Independent random splits")
        ->capture_default_str();
    sub->add_option("--runs-per-split", st.cfg.runs_per_split, "Training runs per split")
        ->capture_default_str();
}

/// Builds the full app; `st` receives the parse results.
std::unique_ptr<CLI::App> build_app(CliState& st) {
    auto app = std::make_unique<CLI::App>(
        "hpgnn: clique-complex lifting, higher-order personalized PageRank, and "
        "polynomial spectral-filter training");
    app->require_subcommand(0, 1);

    CLI::App* lift = app->add_subcommand("lift", "Lift a graph into its clique complex");
    add_input_flags(lift, st);
    add_solver_flags(lift, st);
    lift->add_option("--cap", st.simplex_cap, "Abort if any order exceeds this simplex count")
        ->capture_default_str();
    lift->add_option("--out", st.out_path, "Complex file path (default <out-dir>/complex.txt)");

    CLI::App* stats = app->add_subcommand("stats", "Simplex counts and membership histograms");
    add_input_flags(stats, st);
    add_solver_flags(stats, st);
    stats->add_option("--cap", st.simplex_cap, "Abort if any order exceeds this simplex count")
        ->capture_default_str();
    stats->add_option("--out", st.out_path, "Stats JSON path (default <out-dir>/stats.json)");

    CLI::App* ppr = app->add_subcommand(
        "ppr", "Per-order PPR matrices (raw and symmetrized) with diagnostics");
    add_input_flags(ppr, st);
    add_solver_flags(ppr, st);

    CLI::App* train = app->add_subcommand(
        "train", "Full pipeline: lift, PPR, train/eval over splits, aggregate");
    add_input_flags(train, st);
    add_solver_flags(train, st);
    add_train_flags(train, st);

    CLI::App* eval = app->add_subcommand("eval", "Evaluate a saved checkpoint on a dataset");
    add_input_flags(eval, st);
    add_solver_flags(eval, st);
    add_train_flags(eval, st);
    eval->add_option("--checkpoint", st.checkpoint,
                     "Checkpoint path (default <out-dir>/checkpoint.json)");

    CLI::App* sanity = app->add_subcommand(
        "sanity", "Dataset statistics vs the bundled expectations table");
    add_input_flags(sanity, st);
    add_solver_flags(sanity, st);
    sanity->add_option("--out", st.out_path, "Report path (default <out-dir>/sanity.json)");

    return app;
}

/// Applies --epsilon, then lets a --config file override everything.
void finalize_config(CliState& st) {
    if (st.epsilon_flag > 0) st.cfg.epsilon = st.epsilon_flag;
    if (st.config_file.empty()) return;
    std::ifstream in(st.config_file);
    if (!in) throw IoError("cannot open config file " + st.config_file);
    json file;
    try {
        in >> file;
    } catch (const json::exception& e) {
        throw ParseError(st.config_file + ": " + e.what());
    }
    if (!file.is_object()) throw ParseError(st.config_file + ": config must be a JSON object");
    json merged = st.cfg.to_json();
    merged.update(file);
    st.cfg = ExperimentConfig::from_json(merged);
}

/// Points cfg.dataset at something load_bundle/load_graph understands. With
/// split feature/label files a manifest is written so downstream stages (and
/// the cache key) see one canonical path.
void resolve_dataset(CliState& st) {
    if (!st.cfg.dataset.empty()) return;
    if (st.edge_file.empty())
        throw InvalidArgumentError("no input: pass --dataset or --edge-file");
    if (st.features.empty() && st.labels.empty()) {
        st.cfg.dataset = st.edge_file;
        return;
    }
    json manifest;
    manifest["edges"] = fs::absolute(st.edge_file).string();
    if (!st.features.empty()) manifest["features"] = fs::absolute(st.features).string();
    if (!st.labels.empty()) manifest["labels"] = fs::absolute(st.labels).string();
    fs::path path = fs::path(st.cfg.out_dir) / "input.manifest.json";
    atomic_write_file(path, manifest.dump(2) + "\n");
    st.cfg.dataset = path.string();
}

Graph load_input(const CliState& st) {
    fs::path p(st.cfg.dataset);
    if (!fs::exists(p)) throw IoError("dataset not found: " + st.cfg.dataset);
    if (p.extension() == ".json") return load_bundle(p);
    std::optional<fs::path> feat, lab;
    if (!st.features.empty()) feat = fs::path(st.features);
    if (!st.labels.empty()) lab = fs::path(st.labels);
    return load_graph(p, feat, lab);
}

int run_lift(CliState& st, std::ostream& out) {
    resolve_dataset(st);
    Graph g = load_input(st);
    SimplicialComplex sc = enumerate_cliques(g, st.cfg.max_order, st.simplex_cap);
    fs::path target = st.out_path.empty() ? fs::path(st.cfg.out_dir) / "complex.txt"
                                          : fs::path(st.out_path);
    save_complex(sc, target);
    out << "wrote " << target.string() << "\n";
    for (int p = 1; p <= sc.max_order; ++p)
        out << "order " << p << ": " << sc.simplex_count(p) << " simplices\n";
    return kExitOk;
}

int run_stats(CliState& st, std::ostream& out) {
    resolve_dataset(st);
    Graph g = load_input(st);
    SimplicialComplex sc = enumerate_cliques(g, st.cfg.max_order, st.simplex_cap);
    ComplexStats stats = complex_stats(sc);
    fs::path target = st.out_path.empty() ? fs::path(st.cfg.out_dir) / "stats.json"
                                          : fs::path(st.out_path);
    atomic_write_file(target, stats.to_json() + "\n");
    out << stats.to_json() << "\n";
    return kExitOk;
}

int run_ppr(CliState& st, std::ostream& out) {
    resolve_dataset(st);
    Graph g = load_input(st);
    SimplicialComplex sc = enumerate_cliques(g, st.cfg.max_order, st.simplex_cap);
    NormalizedAdjacency walk1 = normalize(g, NormMode::ColumnStochastic);
    fs::create_directories(st.cfg.out_dir);

    for (int p = 1; p <= st.cfg.max_order; ++p) {
        HigherOrderAdjacency hoa;
        PushOperator op;
        const std::vector<double>* degrees;
        if (p == 1) {
            op = PushOperator::from(walk1, g.num_undirected_edges());
            degrees = &walk1.degrees;
        } else {
            hoa = higher_adjacency(sc, p, st.cfg.binarize);
            op = PushOperator::from(hoa);
            degrees = &hoa.degrees;
        }

        PprMatrix ppr;
        if (st.cfg.solver == "exact") {
            ppr = exact_ppr_matrix(op, st.cfg.alpha);
        } else {
            PushParams params;
            params.alpha = st.cfg.alpha;
            params.lambda = st.cfg.lambda;
            params.omega = st.cfg.omega;
            params.epsilon = st.cfg.epsilon;
            MatrixBuildOptions build;
            build.drop_threshold = st.cfg.drop_threshold;
            build.workers = st.cfg.workers;
            build.collect_diagnostics = true;
            PushMatrixResult res = push_ppr_matrix(op, params, build);
            ppr = std::move(res.matrix);
            save_diagnostics(res.diagnostics,
                             fs::path(st.cfg.out_dir) /
                                 ("diagnostics_p" + std::to_string(p) + ".csv"));
        }
        symmetrize(ppr, *degrees);

        fs::path raw = fs::path(st.cfg.out_dir) / ("pi_p" + std::to_string(p) + ".txt");
        fs::path norm = fs::path(st.cfg.out_dir) / ("pi_norm_p" + std::to_string(p) + ".txt");
        save_ppr_text(ppr, raw, false);
        save_ppr_text(ppr, norm, true);
        out << "order " << p << ": " << ppr.entries.nonZeros() << " entries -> " << raw.string()
            << ", " << norm.string() << "\n";
    }
    return kExitOk;
}

int run_train(CliState& st, std::ostream& out) {
    resolve_dataset(st);
    RunReport report = run_experiment(st.cfg);
    out << "mean test accuracy " << format_double(report.mean_test_acc) << " +- "
        << format_double(report.ci95_half_width) << " over " << report.sample_size << " runs\n";
    out << "artifacts in " << st.cfg.out_dir
        << ": report.json, history.csv, aggregate.csv, checkpoint.json\n";
    return kExitOk;
}

int run_eval(CliState& st, std::ostream& out) {
    resolve_dataset(st);
    Graph g = load_input(st);
    if (!g.has_features()) throw MissingDataError("eval requires a feature matrix");
    if (!g.has_labels()) throw MissingDataError("eval requires labels");
    fs::path ckpt = st.checkpoint.empty() ? fs::path(st.cfg.out_dir) / "checkpoint.json"
                                          : fs::path(st.checkpoint);
    HpgnnModel model = load_checkpoint(ckpt);
    ExperimentConfig cfg = st.cfg;
    cfg.max_order = model.P; // operators must match the checkpoint's P
    OperatorBundle bundle = build_operators(g, cfg, true);
    OperatorSet operators;
    for (const auto& m : bundle.operators) operators.push_back(&m);

    std::vector<int> pred = predict(model, g.features, operators);
    std::vector<NodeId> all(static_cast<std::size_t>(g.n));
    for (std::int64_t i = 0; i < g.n; ++i) all[i] = static_cast<NodeId>(i);
    double acc = accuracy(pred, g.labels, all);

    json metrics;
    metrics["dataset"] = cfg.dataset;
    metrics["checkpoint"] = ckpt.string();
    metrics["nodes"] = g.n;
    metrics["accuracy_all"] = acc;
    metrics["P"] = model.P;
    metrics["K"] = model.K;
    fs::path target = fs::path(cfg.out_dir) / "metrics.json";
    atomic_write_file(target, metrics.dump(2) + "\n");
    out << metrics.dump(2) << "\n";
    return kExitOk;
}

int run_sanity(CliState& st, std::ostream& out) {
    resolve_dataset(st);
    SanityReport report = dataset_sanity(st.cfg.dataset);
    fs::path target = st.out_path.empty() ? fs::path(st.cfg.out_dir) / "sanity.json"
                                          : fs::path(st.out_path);
    atomic_write_file(target, report.to_json().dump(2) + "\n");
    out << report.to_json().dump(2) << "\n";
    return kExitOk;
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::Io: return kExitMissingInput;
        case ErrorCode::InvalidArgument:
        case ErrorCode::Bounds: return kExitBadParam;
        case ErrorCode::Parse:
        case ErrorCode::Dimension:
        case ErrorCode::MissingData:
        case ErrorCode::Stratification: return kExitData;
        case ErrorCode::Convergence:
        case ErrorCode::Numeric:
        case ErrorCode::Divergence: return kExitStage;
        case ErrorCode::Internal: return kExitInternal;
    }
    return kExitInternal;
}

void emit_error(std::ostream& err, const std::string& kind, const std::string& message,
                int code) {
    json j;
    j["error"]["kind"] = kind;
    j["error"]["message"] = message;
    j["error"]["exit_code"] = code;
    err << j.dump() << "\n";
}

} // namespace

std::string help_text() {
    CliState st;
    auto app = build_app(st);
    std::ostringstream out;
    out << app->help();
    for (const CLI::App* sub : app->get_subcommands({}))
        out << "\n" << sub->help();
    return out.str();
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CliState st;
    auto app = build_app(st);

    std::vector<const char*> argv;
    argv.push_back("hpgnn");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app->parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << help_text();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "usage", e.what(), kExitUsage);
        return kExitUsage;
    }

    if (app->get_subcommands().empty()) {
        out << help_text();
        return kExitOk;
    }

    try {
        finalize_config(st);
        CLI::App* sub = app->get_subcommands().front();
        const std::string& name = sub->get_name();
        if (name == "lift") return run_lift(st, out);
        if (name == "stats") return run_stats(st, out);
        if (name == "ppr") return run_ppr(st, out);
        if (name == "train") return run_train(st, out);
        if (name == "eval") return run_eval(st, out);
        if (name == "sanity") return run_sanity(st, out);
        emit_error(err, "usage", "unknown subcommand " + name, kExitUsage);
        return kExitUsage;
    } catch (const Error& e) {
        int code = exit_code_for(e);
        emit_error(err, e.kind(), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        emit_error(err, "internal", e.what(), kExitInternal);
        return kExitInternal;
    }
}

} // namespace hpgnn::cli
