#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgts/envs.hpp"
#include "pgts/policies.hpp"
#include "pgts/polya_gamma.hpp"
#include "pgts/replay.hpp"

namespace pgts {

inline constexpr const char* kVersion = "0.3.0";

/// Environment used by simulate: gaussian | mixture | cluster.
struct EnvSpec {
    std::string kind = "gaussian";
    std::size_t arms = 100;
    std::size_t dim = 10;
    double context_mean = -3.0;
    std::string bundle;                 // cluster: path written by prep-dataset
    std::optional<std::uint64_t> seed;  // defaults to a child of the master seed
};

struct ReplaySpec {
    std::string log;
    std::size_t update_batch = 100;
    std::optional<std::size_t> budget;
    bool disjoint = true;
};

/// Everything needed to reproduce one experiment. Built from presets, a JSON
/// document, and command-line overrides, in that order.
struct ExperimentConfig {
    std::string command = "simulate";
    std::string preset;
    PolicySpec policy;
    EnvSpec env;
    ReplaySpec replay;
    std::size_t rounds = 1000;
    std::size_t runs = 100;
    std::uint64_t seed = 1;
    std::string out_dir;
    std::size_t threads = 1;

    /// Dotted names of fields set explicitly (everything else is a default).
    std::set<std::string> explicit_fields;

    void validate() const;
    nlohmann::json to_json() const;
    /// Applies fields present in `doc` on top of *this.
    void merge_json(const nlohmann::json& doc);
    void mark(const std::string& field) { explicit_fields.insert(field); }
    std::vector<std::string> defaulted_fields() const;
};

/// gaussian-sim (K=100, d=10, T=1000, R=100), mixture-sim (T=5000),
/// cluster-sim (K=32, T=1000). Throws ConfigError for unknown names.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Environment for a simulate config (seeded from env.seed or the master seed).
Environment build_environment(const ExperimentConfig& config);
std::uint64_t environment_seed(const ExperimentConfig& config);

/// Per-run seed; independent of run order.
std::uint64_t run_seed(std::uint64_t master, std::size_t run);

struct RunRecord {
    std::size_t run = 0;
    bool failed = false;
    std::string error;
    RegretTrace trace;    // simulate
    ReplayReport report;  // replay
};

/// Plays `config.rounds` rounds of the configured policy against env.
RunRecord simulate_run(const ExperimentConfig& config, const Environment& env, std::size_t run, std::uint64_t seed);

/// All runs of a simulate config; runs execute on config.threads threads.
std::vector<RunRecord> simulate_runs(const ExperimentConfig& config, const Environment& env);

/// All runs of a replay config over a fixed event list.
std::vector<RunRecord> replay_runs(const ExperimentConfig& config, std::span<const LogEvent> events);

/// Pointwise mean and (n - 1) standard deviation across equal-length series.
struct AggregateTable {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t series = 0;
};
AggregateTable aggregate(std::span<const std::vector<double>> series);

struct ExperimentOutput {
    std::vector<RunRecord> records;
    AggregateTable table;
    std::vector<std::string> files;
    nlohmann::json metadata;
};

/// Validates the config, runs simulate or replay, and writes one CSV per run,
/// aggregate.csv and metadata.json into config.out_dir.
ExperimentOutput run_experiment(const ExperimentConfig& config);

void write_simulation_csv(const std::string& path, const RunRecord& record);
void write_replay_csv(const std::string& path, const RunRecord& record);

// ---------------------------------------------------------------------------

using PgSampler = std::function<double(double c, RandomSource& rng, PgCounters* counters)>;

struct PgDiagnosticRow {
    double c = 0.0;
    double mean = 0.0;
    double oracle = 0.0;
    double z = 0.0;
    double acceptance = 0.0;
    bool pass = false;
};

struct PgDiagnostics {
    std::vector<PgDiagnosticRow> rows;
    bool ok() const;
};

inline constexpr double kMinAcceptance = 0.999;
inline constexpr double kMaxAbsZ = 4.0;

std::vector<double> default_c_grid();

/// Empirical mean vs series oracle and acceptance rate per tilt value. A row
/// fails when acceptance < 0.999 or |z| > 4.
PgDiagnostics pg_diagnose(std::span<const double> c_grid, std::size_t n_draws, std::uint64_t seed,
                          const PgSampler& sampler = sample_pg1);

}  // namespace pgts
