#include "hpgnn/graph_io.hpp"
#include "hpgnn/errors.hpp"
#include "hpgnn/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

namespace hpgnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Strips a '#' comment and returns whether anything non-blank remains.
bool strip_comment(std::string& line) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
    return line.find_first_not_of(" \t\r\n") != std::string::npos;
}

} // namespace

Graph load_graph(const fs::path& edge_path, std::optional<fs::path> feature_path,
                 std::optional<fs::path> label_path, const LoadOptions& opts) {
    std::ifstream in(edge_path);
    if (!in) throw IoError("cannot open edge list " + edge_path.string());

    std::vector<std::pair<std::int64_t, std::int64_t>> raw;
    std::int64_t declared_n = -1;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // A "# nodes N" header pins the node count (needed for trailing
        // isolated nodes, which never appear as endpoints).
        if (line.rfind("# nodes", 0) == 0) {
            std::istringstream hs(line.substr(7));
            if (!(hs >> declared_n) || declared_n < 0)
                throw ParseError(edge_path.string() + ":" + std::to_string(line_no) +
                                 ": bad node-count header");
            continue;
        }
        if (!strip_comment(line)) continue;
        std::istringstream ls(line);
        std::int64_t u, v;
        if (!(ls >> u >> v))
            throw ParseError(edge_path.string() + ":" + std::to_string(line_no) +
                             ": expected two integer endpoints");
        std::string extra;
        if (ls >> extra)
            throw ParseError(edge_path.string() + ":" + std::to_string(line_no) +
                             ": trailing tokens after endpoints");
        raw.emplace_back(u, v);
    }

    Graph g;
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(raw.size());
    if (opts.remap_ids) {
        std::map<std::int64_t, NodeId> remap;
        for (const auto& [u, v] : raw) {
            remap.emplace(u, 0);
            remap.emplace(v, 0);
        }
        NodeId next = 0;
        std::vector<std::int64_t> originals;
        originals.reserve(remap.size());
        for (auto& [orig, compact] : remap) {
            compact = next++;
            originals.push_back(orig);
        }
        for (const auto& [u, v] : raw) edges.emplace_back(remap.at(u), remap.at(v));
        std::int64_t n = static_cast<std::int64_t>(remap.size());
        if (declared_n >= 0 && declared_n < n)
            throw ParseError("node-count header smaller than distinct endpoint count");
        if (declared_n > n) {
            for (std::int64_t i = n; i < declared_n; ++i) originals.push_back(-1);
            n = declared_n;
        }
        g = Graph::from_edges(n, std::move(edges));
        g.original_ids = std::move(originals);
    } else {
        std::int64_t max_id = -1;
        for (const auto& [u, v] : raw) {
            if (u < 0 || v < 0) throw ParseError("negative node id (use remap_ids)");
            max_id = std::max({max_id, u, v});
        }
        std::int64_t n = max_id + 1;
        if (declared_n >= 0) {
            if (declared_n < n) throw ParseError("node-count header smaller than max id + 1");
            n = declared_n;
        }
        for (const auto& [u, v] : raw)
            edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        g = Graph::from_edges(n, std::move(edges));
    }

    if (feature_path) {
        g.features = load_features(*feature_path);
        if (g.features.rows() != g.n)
            throw DimensionError("feature rows (" + std::to_string(g.features.rows()) +
                                 ") do not match node count (" + std::to_string(g.n) + ")");
    }
    if (label_path) {
        g.labels = load_labels(*label_path);
        if (static_cast<std::int64_t>(g.labels.size()) != g.n)
            throw DimensionError("label count (" + std::to_string(g.labels.size()) +
                                 ") does not match node count (" + std::to_string(g.n) + ")");
    }
    return g;
}

void save_edge_list(const Graph& g, const fs::path& path) {
    std::ostringstream out;
    out << "# nodes " << g.n << "\n";
    for (const auto& [u, v] : g.edges) out << u << " " << v << "\n";
    atomic_write_file(path, out.str());
}

Eigen::MatrixXd load_features_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature file " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::int64_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!strip_comment(line)) continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double x;
        while (ls >> x) row.push_back(x);
        if (!ls.eof())
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": non-numeric feature value");
        if (rows.empty())
            width = row.size();
        else if (row.size() != width)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": ragged feature row");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(static_cast<std::int64_t>(rows.size()), static_cast<std::int64_t>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) m(i, j) = rows[i][j];
    return m;
}

void save_features_text(const Eigen::MatrixXd& features, const fs::path& path) {
    std::ostringstream out;
    for (std::int64_t i = 0; i < features.rows(); ++i) {
        for (std::int64_t j = 0; j < features.cols(); ++j) {
            if (j) out << ' ';
            out << format_double(features(i, j));
        }
        out << '\n';
    }
    atomic_write_file(path, out.str());
}

namespace {
constexpr char kFeatureMagic[6] = {'H', 'P', 'G', 'F', '1', '\n'};
}

Eigen::MatrixXd load_features_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file " + path.string());
    char magic[6];
    if (!in.read(magic, 6) || !std::equal(magic, magic + 6, kFeatureMagic))
        throw ParseError(path.string() + ": bad feature-file magic");
    std::int64_t n = 0, f = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&f), sizeof f);
    if (!in || n < 0 || f < 0) throw ParseError(path.string() + ": bad feature header");
    Eigen::MatrixXd m(n, f);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n * f)));
    if (!in) throw ParseError(path.string() + ": truncated feature payload");
    return m;
}

void save_features_binary(const Eigen::MatrixXd& features, const fs::path& path) {
    std::string payload(kFeatureMagic, 6);
    std::int64_t n = features.rows(), f = features.cols();
    payload.append(reinterpret_cast<const char*>(&n), sizeof n);
    payload.append(reinterpret_cast<const char*>(&f), sizeof f);
    payload.append(reinterpret_cast<const char*>(features.data()),
                   sizeof(double) * static_cast<std::size_t>(n * f));
    atomic_write_file(path, payload);
}

Eigen::MatrixXd load_features(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file " + path.string());
    char magic[6] = {};
    in.read(magic, 6);
    in.close();
    if (std::equal(magic, magic + 6, kFeatureMagic)) return load_features_binary(path);
    return load_features_text(path);
}

std::vector<int> load_labels(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file " + path.string());
    std::vector<int> labels;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!strip_comment(line)) continue;
        std::istringstream ls(line);
        int y;
        std::string extra;
        if (!(ls >> y) || (ls >> extra))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected one integer label per line");
        if (y < 0)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": negative class id");
        labels.push_back(y);
    }
    return labels;
}

void save_labels(const std::vector<int>& labels, const fs::path& path) {
    std::ostringstream out;
    for (int y : labels) out << y << '\n';
    atomic_write_file(path, out.str());
}

void save_id_map(const Graph& g, const fs::path& path) {
    std::ostringstream out;
    out << "# compact_id original_id\n";
    for (std::size_t i = 0; i < g.original_ids.size(); ++i)
        out << i << ' ' << g.original_ids[i] << '\n';
    atomic_write_file(path, out.str());
}

BundleManifest read_manifest(const fs::path& manifest_path) {
    json j;
    try {
        j = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    BundleManifest m;
    try {
        m.edges = j.at("edges").get<std::string>();
        if (j.contains("features") && !j["features"].is_null())
            m.features = fs::path(j["features"].get<std::string>());
        if (j.contains("labels") && !j["labels"].is_null())
            m.labels = fs::path(j["labels"].get<std::string>());
        if (j.contains("n")) m.n = j["n"].get<std::int64_t>();
        if (j.contains("num_features")) m.num_features = j["num_features"].get<std::int64_t>();
        if (j.contains("num_classes")) m.num_classes = j["num_classes"].get<int>();
        if (j.contains("checksums"))
            for (const auto& [file, digest] : j["checksums"].items())
                m.checksums.emplace_back(file, digest.get<std::string>());
    } catch (const json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    return m;
}

Graph load_bundle(const fs::path& manifest_path, const LoadOptions& opts) {
    BundleManifest m = read_manifest(manifest_path);
    fs::path base = manifest_path.parent_path();
    auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : base / p; };

    for (const auto& [file, digest] : m.checksums) {
        std::string actual = checksum_file_hex(resolve(file));
        if (actual != digest)
            throw IoError("checksum mismatch for " + file + ": manifest says " + digest +
                          ", file hashes to " + actual);
    }

    std::optional<fs::path> feat, lab;
    if (m.features) feat = resolve(*m.features);
    if (m.labels) lab = resolve(*m.labels);
    Graph g = load_graph(resolve(m.edges), feat, lab, opts);

    if (m.n && *m.n != g.n)
        throw DimensionError("manifest declares " + std::to_string(*m.n) + " nodes, loaded " +
                             std::to_string(g.n));
    if (m.num_features && g.features.cols() != *m.num_features)
        throw DimensionError("manifest declares " + std::to_string(*m.num_features) +
                             " features, loaded " + std::to_string(g.features.cols()));
    if (m.num_classes && g.num_classes() > *m.num_classes)
        throw DimensionError("label file contains class ids beyond manifest num_classes");
    return g;
}

std::filesystem::path write_bundle(const Graph& g, const fs::path& dir, const std::string& name,
                                   bool binary_features) {
    fs::create_directories(dir);
    std::string edge_file = name + ".edges";
    save_edge_list(g, dir / edge_file);
    json j;
    j["name"] = name;
    j["edges"] = edge_file;
    j["n"] = g.n;
    if (g.has_features()) {
        std::string feat_file = name + (binary_features ? ".feat.bin" : ".feat");
        if (binary_features)
            save_features_binary(g.features, dir / feat_file);
        else
            save_features_text(g.features, dir / feat_file);
        j["features"] = feat_file;
        j["num_features"] = g.num_features();
    }
    if (g.has_labels()) {
        std::string label_file = name + ".labels";
        save_labels(g.labels, dir / label_file);
        j["labels"] = label_file;
        j["num_classes"] = g.num_classes();
    }
    json checksums = json::object();
    checksums[edge_file] = checksum_file_hex(dir / edge_file);
    if (j.contains("features"))
        checksums[j["features"].get<std::string>()] =
            checksum_file_hex(dir / j["features"].get<std::string>());
    if (j.contains("labels"))
        checksums[j["labels"].get<std::string>()] =
            checksum_file_hex(dir / j["labels"].get<std::string>());
    j["checksums"] = checksums;
    fs::path manifest = dir / (name + ".manifest.json");
    atomic_write_file(manifest, j.dump(2) + "\n");
    return manifest;
}

void atomic_write_file(const fs::path& path, const std::string& contents) {
    fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
    }
}

std::string checksum_file_hex(const fs::path& path) {
    std::string data = read_file(path);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

} // namespace hpgnn
