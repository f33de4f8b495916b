#pragma once

#include "hpgnn/graph.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace hpgnn {

struct LoadOptions {
    /// Remap arbitrary (possibly non-contiguous) node ids to 0..n-1 in sorted
    /// order; the mapping is kept in Graph::original_ids. When off, ids must be
    /// nonnegative and the node count is 1 + max id (or a "# nodes N" header).
    bool remap_ids = false;
};

/// Reads an edge-list text file ("u v" per line, '#' comments) plus optional
/// feature and label files. Feature row r and label line r refer to final node
/// id r.
Graph load_graph(const std::filesystem::path& edge_path,
                 std::optional<std::filesystem::path> feature_path = std::nullopt,
                 std::optional<std::filesystem::path> label_path = std::nullopt,
                 const LoadOptions& opts = {});

void save_edge_list(const Graph& g, const std::filesystem::path& path);

/// Whitespace-separated text matrix, one row per node.
Eigen::MatrixXd load_features_text(const std::filesystem::path& path);
void save_features_text(const Eigen::MatrixXd& features, const std::filesystem::path& path);

/// Binary columnar format for large graphs: "HPGF1\n", int64 n, int64 f,
/// column-major float64 payload.
Eigen::MatrixXd load_features_binary(const std::filesystem::path& path);
void save_features_binary(const Eigen::MatrixXd& features, const std::filesystem::path& path);

/// Dispatches on the binary magic, falling back to text.
Eigen::MatrixXd load_features(const std::filesystem::path& path);

std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<int>& labels, const std::filesystem::path& path);

void save_id_map(const Graph& g, const std::filesystem::path& path);

/// JSON manifest naming the bundle files plus expected shapes.
struct BundleManifest {
    std::filesystem::path edges;
    std::optional<std::filesystem::path> features;
    std::optional<std::filesystem::path> labels;
    std::optional<std::int64_t> n;
    std::optional<std::int64_t> num_features;
    std::optional<int> num_classes;
    /// file name -> fnv1a64 hex digest
    std::vector<std::pair<std::string, std::string>> checksums;
};

BundleManifest read_manifest(const std::filesystem::path& manifest_path);

/// Loads the graph a manifest describes; relative paths resolve against the
/// manifest's directory. Shape fields from the manifest are enforced.
Graph load_bundle(const std::filesystem::path& manifest_path, const LoadOptions& opts = {});

/// Writes edge/feature/label files plus a manifest into `dir`; returns the
/// manifest path.
std::filesystem::path write_bundle(const Graph& g, const std::filesystem::path& dir,
                                   const std::string& name, bool binary_features = false);

/// Atomic replace: writes to a temp file in the target directory, then renames.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

std::string checksum_file_hex(const std::filesystem::path& path);

} // namespace hpgnn
