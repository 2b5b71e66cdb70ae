#include "pgts/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pgts/errors.hpp"
#include "pgts/policies.hpp"
#include "pgts/random.hpp"

namespace pgts {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// Splits one CSV line; double-quoted fields may contain commas.
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field += ch;
        }
    }
    fields.push_back(trim(field));
    return fields;
}

bool parse_number(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* begin = text.data();
    if (*begin == '+') ++begin;
    const char* end = text.data() + text.size();
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end && std::isfinite(out);
}

double squared_distance(const Matrix& points, Eigen::Index i, const Matrix& centroids, Eigen::Index c) {
    return (points.row(i) - centroids.row(c)).squaredNorm();
}

std::pair<Eigen::Index, double> nearest(const Matrix& points, Eigen::Index i, const Matrix& centroids) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double dist = squared_distance(points, i, centroids, c);
        if (dist < best_d) {
            best_d = dist;
            best = c;
        }
    }
    return {best, best_d};
}

Matrix kmeans_plus_plus(const Matrix& points, std::size_t k, RandomSource& rng) {
    const Eigen::Index n = points.rows();
    Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    Vector dist(n);
    for (Eigen::Index i = 0; i < n; ++i) dist[i] = squared_distance(points, i, centroids, 0);
    for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(k); ++c) {
        const double total = dist.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += dist[i];
                if (acc >= target && dist[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
        }
        centroids.row(c) = points.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) dist[i] = std::min(dist[i], squared_distance(points, i, centroids, c));
    }
    return centroids;
}

double assign_all(const Matrix& points, const Matrix& centroids, std::vector<std::size_t>& assignments) {
    double inertia = 0.0;
    assignments.resize(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const auto [c, dist] = nearest(points, i, centroids);
        assignments[static_cast<std::size_t>(i)] = static_cast<std::size_t>(c);
        inertia += dist;
    }
    return inertia;
}

const char* kind_name(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::intercept: return "intercept";
    }
    return "numeric";
}

}  // namespace

// ---------------------------------------------------------------------------

TableSchema TableSchema::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("schema: malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("columns") || !doc.contains("label"))
        throw LoadError("schema: needs 'columns' and 'label'");
    TableSchema schema;
    schema.label = doc["label"].get<std::string>();
    for (const json& col : doc["columns"]) {
        Column c;
        c.name = col.at("name").get<std::string>();
        const std::string type = col.value("type", "numeric");
        if (type == "numeric") {
            c.kind = ColumnKind::numeric;
        } else if (type == "categorical") {
            c.kind = ColumnKind::categorical;
        } else {
            throw LoadError("schema: column '" + c.name + "' has unknown type '" + type + "'");
        }
        if (c.name != schema.label) schema.columns.push_back(c);
    }
    if (schema.columns.empty()) throw LoadError("schema: no feature columns");
    return schema;
}

TableSchema TableSchema::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open schema file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

Matrix Dataset::context_features() const {
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].kind != ColumnKind::categorical) keep.push_back(static_cast<Eigen::Index>(j));
    Matrix out(rows.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = rows.col(keep[j]);
    return out;
}

Dataset load_table(const std::string& path, const TableSchema& schema) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open data file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw LoadError(path + ": empty file (no header row)");
    const std::vector<std::string> header = split_csv(line);

    const auto locate = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw LoadError(path + ": column '" + name + "' not found in header");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> source;
    for (const auto& c : schema.columns) source.push_back(locate(c.name));
    const std::size_t label_col = locate(schema.label);

    Dataset data;
    data.columns = schema.columns;
    std::vector<std::unordered_map<std::string, double>> codes(schema.columns.size());
    std::vector<double> values;
    std::size_t row_number = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row_number;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != header.size())
            throw LoadError(path + ": row " + std::to_string(row_number) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(header.size()));
        for (std::size_t j = 0; j < schema.columns.size(); ++j) {
            const std::string& text = fields[source[j]];
            double v = 0.0;
            if (schema.columns[j].kind == ColumnKind::categorical) {
                auto& map = codes[j];
                v = map.emplace(text, static_cast<double>(map.size())).first->second;
            } else if (!parse_number(text, v)) {
                throw LoadError(path + ": row " + std::to_string(row_number) + ", column '" +
                                schema.columns[j].name + "': not a number: '" + text + "'");
            }
            values.push_back(v);
        }
        data.labels.push_back(fields[label_col]);
    }
    if (data.labels.empty()) throw LoadError(path + ": no data rows");
    const auto n = static_cast<Eigen::Index>(data.labels.size());
    const auto d = static_cast<Eigen::Index>(schema.columns.size());
    data.rows = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), n, d);
    return data;
}

Dataset standardize(const Dataset& data) {
    if (data.size() < 2) throw TransformError("standardize: need at least 2 rows");
    bool any_numeric = false;
    bool has_intercept = false;
    Dataset out = data;
    const double n = static_cast<double>(data.size());
    for (std::size_t j = 0; j < data.columns.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        if (data.columns[j].kind == ColumnKind::intercept) has_intercept = true;
        if (data.columns[j].kind != ColumnKind::numeric) continue;
        any_numeric = true;
        const double mean = data.rows.col(col).mean();
        const double var = (data.rows.col(col).array() - mean).square().sum() / (n - 1.0);
        if (!(var > 0.0)) throw TransformError("standardize: column '" + data.columns[j].name + "' has zero variance");
        out.rows.col(col) = (data.rows.col(col).array() - mean) / std::sqrt(var);
    }
    if (!any_numeric) throw TransformError("standardize: no numeric columns");
    if (!has_intercept) {
        out.columns.push_back({"intercept", ColumnKind::intercept});
        out.rows.conservativeResize(Eigen::NoChange, out.rows.cols() + 1);
        out.rows.col(out.rows.cols() - 1).setOnes();
    }
    return out;
}

Clustering minibatch_kmeans(const Matrix& points, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (options.k < 1) throw InvalidArgument("minibatch_kmeans: k must be >= 1");
    if (options.k > n) throw InvalidArgument("minibatch_kmeans: k exceeds the number of points");
    if (options.batch_size < 1) throw InvalidArgument("minibatch_kmeans: batch_size must be >= 1");
    RandomSource rng(options.seed);
    Clustering result;
    result.centroids = kmeans_plus_plus(points, options.k, rng);
    const auto k = static_cast<Eigen::Index>(options.k);

    if (options.batch_size >= n) {
        // Lloyd iterations
        result.inertia_trace.push_back(assign_all(points, result.centroids, result.assignments));
        for (std::size_t it = 0; it < options.iterations; ++it) {
            Matrix sums = Matrix::Zero(k, points.cols());
            std::vector<std::size_t> counts(options.k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                sums.row(static_cast<Eigen::Index>(result.assignments[i])) += points.row(static_cast<Eigen::Index>(i));
                ++counts[result.assignments[i]];
            }
            for (Eigen::Index c = 0; c < k; ++c)
                if (counts[static_cast<std::size_t>(c)] > 0)
                    result.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            const std::vector<std::size_t> previous = result.assignments;
            result.inertia_trace.push_back(assign_all(points, result.centroids, result.assignments));
            if (result.assignments == previous) break;
        }
    } else {
        std::vector<std::size_t> seen(options.k, 0);
        std::vector<Eigen::Index> batch(options.batch_size);
        std::vector<Eigen::Index> nearest_centroid(options.batch_size);
        for (std::size_t it = 0; it < options.iterations; ++it) {
            for (auto& i : batch) i = static_cast<Eigen::Index>(rng.index(n));
            for (std::size_t b = 0; b < batch.size(); ++b)
                nearest_centroid[b] = nearest(points, batch[b], result.centroids).first;
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const Eigen::Index c = nearest_centroid[b];
                const double eta = 1.0 / static_cast<double>(++seen[static_cast<std::size_t>(c)]);
                result.centroids.row(c) = (1.0 - eta) * result.centroids.row(c) + eta * points.row(batch[b]);
            }
        }
    }
    result.inertia = assign_all(points, result.centroids, result.assignments);
    result.counts.assign(options.k, 0);
    for (std::size_t a : result.assignments) ++result.counts[a];
    return result;
}

ClusterRates binarize_and_rates(const Dataset& data, const std::vector<std::size_t>& assignments, std::size_t k,
                                const std::string& positive_class) {
    if (assignments.size() != data.size()) throw InvalidArgument("binarize_and_rates: assignment count mismatch");
    ClusterRates out;
    out.rates.assign(k, 0.0);
    out.sizes.assign(k, 0);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] >= k) throw InvalidArgument("binarize_and_rates: assignment out of range");
        ++out.sizes[assignments[i]];
        if (data.labels[i] == positive_class) out.rates[assignments[i]] += 1.0;
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (out.sizes[c] == 0) {
            out.empty_clusters.push_back(c);
        } else {
            out.rates[c] /= static_cast<double>(out.sizes[c]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Environment EnvBundle::environment() const { return make_cluster_env(centroids, rates); }

std::string EnvBundle::to_json() const {
    json doc;
    doc["arms"] = centroids.size();
    doc["dim"] = centroids.empty() ? 0 : centroids.front().size();
    json cs = json::array();
    for (const auto& c : centroids) cs.push_back(std::vector<double>(c.data(), c.data() + c.size()));
    doc["centroids"] = cs;
    doc["rates"] = rates;
    doc["sizes"] = sizes;
    doc["metadata"] = metadata_json.empty() ? json::object() : json::parse(metadata_json);
    return doc.dump(2) + "\n";
}

EnvBundle EnvBundle::from_json(const std::string& text) {
    EnvBundle bundle;
    try {
        const json doc = json::parse(text);
        for (const json& c : doc.at("centroids")) {
            const auto values = c.get<std::vector<double>>();
            bundle.centroids.emplace_back(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
        }
        bundle.rates = doc.at("rates").get<std::vector<double>>();
        if (doc.contains("sizes")) bundle.sizes = doc["sizes"].get<std::vector<std::size_t>>();
        if (doc.contains("metadata")) bundle.metadata_json = doc["metadata"].dump();
    } catch (const json::exception& e) {
        throw LoadError(std::string("environment bundle: ") + e.what());
    }
    if (bundle.centroids.size() != bundle.rates.size())
        throw LoadError("environment bundle: centroid and rate counts differ");
    return bundle;
}

EnvBundle EnvBundle::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open environment bundle '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

void EnvBundle::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write environment bundle '" + path + "'");
    out << to_json();
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open '" + path + "'");
    std::uint64_t h = fnv1a(nullptr, 0);
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
}

EnvBundle prep_dataset(const PrepOptions& options) {
    const TableSchema schema = TableSchema::from_json_file(options.schema_path);
    const Dataset raw = load_table(options.data_path, schema);
    const Dataset data = standardize(raw);
    const Clustering clustering = minibatch_kmeans(data.context_features(), options.kmeans);
    const ClusterRates rates = binarize_and_rates(data, clustering.assignments, options.kmeans.k, options.positive_class);

    EnvBundle bundle;
    for (Eigen::Index c = 0; c < clustering.centroids.rows(); ++c)
        bundle.centroids.emplace_back(clustering.centroids.row(c).transpose());
    bundle.rates = rates.rates;
    bundle.sizes = rates.sizes;

    json columns = json::array();
    for (const auto& c : data.columns) columns.push_back({{"name", c.name}, {"kind", kind_name(c.kind)}});
    json meta = {
        {"source", options.data_path},
        {"source_fnv1a64", file_digest(options.data_path)},
        {"rows", raw.size()},
        {"positive_class", options.positive_class},
        {"variance_convention", "sample (n-1)"},
        {"intercept_appended", true},
        {"columns", columns},
        {"kmeans", {{"k", options.kmeans.k}, {"batch_size", options.kmeans.batch_size},
                    {"iterations", options.kmeans.iterations}, {"seed", options.kmeans.seed},
                    {"init", "k-means++"}, {"inertia", clustering.inertia}}},
        {"empty_clusters", rates.empty_clusters},
    };
    bundle.metadata_json = meta.dump();
    return bundle;
}

void write_synthetic_cover(const std::string& csv_path, const std::string& schema_path, std::size_t rows,
                           std::uint64_t seed) {
    static const char* kNumeric[10] = {"Elevation", "Aspect", "Slope", "Horizontal_Distance_To_Hydrology",
                                       "Vertical_Distance_To_Hydrology", "Horizontal_Distance_To_Roadways",
                                       "Hillshade_9am", "Hillshade_Noon", "Hillshade_3pm",
                                       "Horizontal_Distance_To_Fire_Points"};
    static const double kScale[10] = {280, 110, 7.5, 210, 58, 1550, 27, 20, 38, 1320};
    static const double kCenter[10] = {2950, 155, 14, 270, 46, 2350, 212, 223, 142, 1980};
    static const char* kOther[] = {"Lodgepole Pine", "Ponderosa Pine", "Cottonwood/Willow", "Aspen", "Douglas-fir",
                                   "Krummholz"};
    constexpr int kRegions = 8;

    RandomSource rng(seed);
    // region centers in standardized units, and each region's Spruce/Fir logit offset
    std::vector<Vector> centers;
    std::vector<double> offsets;
    for (int r = 0; r < kRegions; ++r) {
        Vector c(10);
        for (auto& v : c) v = 1.5 * rng.normal();
        centers.push_back(c);
        offsets.push_back(-3.0 + 3.0 * static_cast<double>(r) / (kRegions - 1) + 0.3 * rng.normal());
    }

    std::ofstream out(csv_path);
    if (!out) throw LoadError("cannot write '" + csv_path + "'");
    for (const char* name : kNumeric) out << name << ',';
    out << "Wilderness_Area,Soil_Type,Cover_Type\n";
    out << std::setprecision(6);
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t region = rng.index(kRegions);
        Vector z = centers[region];
        for (auto& v : z) v += 0.6 * rng.normal();
        for (int j = 0; j < 10; ++j) out << kCenter[j] + kScale[j] * z[j] << ',';
        out << "Area" << (region % 4 + 1) << ",Soil" << rng.index(40) + 1 << ',';
        const double p = sigmoid(offsets[region] + 0.8 * z[0]);
        if (rng.bernoulli(p)) {
            out << "Spruce/Fir\n";
        } else {
            out << kOther[rng.index(6)] << '\n';
        }
    }

    json schema = {{"label", "Cover_Type"}, {"columns", json::array()}};
    for (const char* name : kNumeric) schema["columns"].push_back({{"name", name}, {"type", "numeric"}});
    schema["columns"].push_back({{"name", "Wilderness_Area"}, {"type", "categorical"}});
    schema["columns"].push_back({{"name", "Soil_Type"}, {"type", "categorical"}});
    schema["columns"].push_back({{"name", "Cover_Type"}, {"type", "categorical"}});
    std::ofstream schema_out(schema_path);
    if (!schema_out) throw LoadError("cannot write '" + schema_path + "'");
    schema_out << schema.dump(2) << '\n';
}

}  // namespace pgts
