#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pgts/envs.hpp"
#include "pgts/gauss.hpp"

namespace pgts {

enum class ColumnKind { numeric, categorical, intercept };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

/// Which CSV columns to read and how. Columns in the file but not in the
/// schema are ignored.
struct TableSchema {
    std::vector<Column> columns;
    std::string label;

    static TableSchema from_json_text(const std::string& text);
    static TableSchema from_json_file(const std::string& path);
};

/// Labeled table. Categorical feature values are stored as integer codes in
/// order of first appearance.
struct Dataset {
    std::vector<Column> columns;
    Matrix rows;  // N x columns.size()
    std::vector<std::string> labels;

    std::size_t size() const { return labels.size(); }
    /// Numeric and intercept columns only, in column order.
    Matrix context_features() const;
};

/// Reads a comma-separated file with a header row.
Dataset load_table(const std::string& path, const TableSchema& schema);

/// Centers and scales numeric columns to sample mean 0 and sample variance 1
/// (n - 1 denominator), passes categorical columns through and appends an
/// intercept column of ones unless one is already present.
Dataset standardize(const Dataset& data);

struct KMeansOptions {
    std::size_t k = 32;
    std::size_t batch_size = 1024;
    std::size_t iterations = 200;
    std::uint64_t seed = 0;
};

struct Clustering {
    Matrix centroids;  // k x d
    std::vector<std::size_t> assignments;
    std::vector<std::size_t> counts;
    double inertia = 0.0;
    /// Inertia after seeding and after every Lloyd iteration (full-batch mode only).
    std::vector<double> inertia_trace;
};

/// k-means++ seeding followed by mini-batch updates with per-centroid step
/// 1/count. When batch_size >= N every iteration is a full Lloyd step. A final
/// pass assigns every point and computes the inertia.
Clustering minibatch_kmeans(const Matrix& points, const KMeansOptions& options);

struct ClusterRates {
    std::vector<double> rates;
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> empty_clusters;
};

/// Reward 1 iff label == positive_class; rate per cluster is the mean reward.
/// Empty clusters get rate 0 and are listed in empty_clusters.
ClusterRates binarize_and_rates(const Dataset& data, const std::vector<std::size_t>& assignments, std::size_t k,
                                const std::string& positive_class);

/// Cluster-backed environment plus provenance, as written by prep-dataset.
struct EnvBundle {
    std::vector<Vector> centroids;
    std::vector<double> rates;
    std::vector<std::size_t> sizes;
    std::string metadata_json;  // serialized provenance object

    Environment environment() const;
    std::string to_json() const;
    static EnvBundle from_json(const std::string& text);
    static EnvBundle load(const std::string& path);
    void save(const std::string& path) const;
};

struct PrepOptions {
    std::string data_path;
    std::string schema_path;
    std::string positive_class;
    KMeansOptions kmeans;
};

/// load -> standardize -> cluster -> rates.
EnvBundle prep_dataset(const PrepOptions& options);

/// Hex FNV-1a-64 digest of a file's bytes.
std::string file_digest(const std::string& path);

/// Writes a labeled CSV resembling the forest-cover layout: 10 numeric
/// columns, 2 categorical columns and a Cover_Type label, plus its schema.
void write_synthetic_cover(const std::string& csv_path, const std::string& schema_path, std::size_t rows,
                           std::uint64_t seed);

}  // namespace pgts
