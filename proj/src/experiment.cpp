#include "pgts/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "pgts/errors.hpp"
#include "pgts/ingest.hpp"

namespace pgts {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEnvStream = 0x656e76;  // "env"

template <class T>
void take(const json& doc, const char* key, T& field, ExperimentConfig& config, const std::string& prefix) {
    if (!doc.contains(key) || doc[key].is_null()) return;
    try {
        field = doc[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + prefix + key + "' has the wrong type");
    }
    config.mark(prefix + key);
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

std::string run_file(const char* stem, std::size_t run) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03zu.csv", stem, run);
    return buf;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    return out;
}

void write_aggregate_csv(const std::string& path, const char* index_name, const char* value_name,
                         const AggregateTable& table) {
    std::ofstream out = open_output(path);
    out << index_name << ",mean_" << value_name << ",std_" << value_name << ",runs\n";
    for (std::size_t i = 0; i < table.mean.size(); ++i)
        out << i + 1 << ',' << format_double(table.mean[i]) << ',' << format_double(table.stddev[i]) << ','
            << table.series << '\n';
}

std::string default_out_dir() {
    if (const char* env = std::getenv("PGTS_OUT_DIR"); env && *env) return env;
    return "pgts-out";
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

void ExperimentConfig::validate() const {
    if (command != "simulate" && command != "replay") throw ConfigError("unknown command '" + command + "'");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    try {
        policy.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("policy: ") + e.what());
    }
    if (command == "simulate") {
        if (env.kind != "gaussian" && env.kind != "mixture" && env.kind != "cluster")
            throw ConfigError("unknown environment kind '" + env.kind + "'");
        if (env.kind == "cluster" && env.bundle.empty())
            throw ConfigError("cluster environment needs an environment bundle (--env-bundle)");
        if (env.kind != "cluster" && (env.arms < 2 || env.dim < 1))
            throw ConfigError("simulated environments need arms >= 2 and dim >= 1");
    } else {
        if (replay.log.empty()) throw ConfigError("replay needs a log file (--log)");
        if (replay.update_batch < 1) throw ConfigError("update_batch must be >= 1");
    }
}

json ExperimentConfig::to_json() const {
    json doc = {
        {"command", command},
        {"preset", preset},
        {"rounds", rounds},
        {"runs", runs},
        {"seed", seed},
        {"out", out_dir},
        {"threads", threads},
        {"policy",
         {{"name", policy.name},
          {"prior_mean", policy.prior_mean},
          {"prior_variance", policy.prior_variance},
          {"burn_in", policy.name == "pg-ts-stream" ? 1 : policy.burn_in},
          {"lambda", policy.lambda},
          {"alpha", policy.alpha},
          {"regularizer", policy.regularizer},
          {"window", policy.window}}},
        {"env",
         {{"kind", env.kind},
          {"arms", env.arms},
          {"dim", env.dim},
          {"context_mean", env.context_mean},
          {"bundle", env.bundle},
          {"seed", env.seed ? json(*env.seed) : json(nullptr)}}},
        {"replay",
         {{"log", replay.log},
          {"update_batch", replay.update_batch},
          {"budget", replay.budget ? json(*replay.budget) : json(nullptr)},
          {"disjoint", replay.disjoint}}},
    };
    return doc;
}

void ExperimentConfig::merge_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (doc.contains("preset") && doc["preset"].is_string() && !doc["preset"].get<std::string>().empty()) {
        auto fields = explicit_fields;
        *this = preset_config(doc["preset"].get<std::string>());
        explicit_fields.insert(fields.begin(), fields.end());
        mark("preset");
    }
    take(doc, "command", command, *this, "");
    take(doc, "rounds", rounds, *this, "");
    take(doc, "runs", runs, *this, "");
    take(doc, "seed", seed, *this, "");
    take(doc, "out", out_dir, *this, "");
    take(doc, "threads", threads, *this, "");
    if (doc.contains("policy")) {
        const json& p = doc["policy"];
        take(p, "name", policy.name, *this, "policy.");
        take(p, "prior_mean", policy.prior_mean, *this, "policy.");
        take(p, "prior_variance", policy.prior_variance, *this, "policy.");
        take(p, "burn_in", policy.burn_in, *this, "policy.");
        take(p, "lambda", policy.lambda, *this, "policy.");
        take(p, "alpha", policy.alpha, *this, "policy.");
        take(p, "regularizer", policy.regularizer, *this, "policy.");
        take(p, "window", policy.window, *this, "policy.");
    }
    if (doc.contains("env")) {
        const json& e = doc["env"];
        take(e, "kind", env.kind, *this, "env.");
        take(e, "arms", env.arms, *this, "env.");
        take(e, "dim", env.dim, *this, "env.");
        take(e, "context_mean", env.context_mean, *this, "env.");
        take(e, "bundle", env.bundle, *this, "env.");
        if (e.contains("seed") && !e["seed"].is_null()) {
            std::uint64_t s = 0;
            take(e, "seed", s, *this, "env.");
            env.seed = s;
        }
    }
    if (doc.contains("replay")) {
        const json& r = doc["replay"];
        take(r, "log", replay.log, *this, "replay.");
        take(r, "update_batch", replay.update_batch, *this, "replay.");
        take(r, "disjoint", replay.disjoint, *this, "replay.");
        if (r.contains("budget") && !r["budget"].is_null()) {
            std::size_t b = 0;
            take(r, "budget", b, *this, "replay.");
            replay.budget = b;
        }
    }
}

std::vector<std::string> ExperimentConfig::defaulted_fields() const {
    std::vector<std::string> out;
    const json doc = to_json();
    for (const auto& [key, value] : doc.items()) {
        if (value.is_object()) {
            for (const auto& [inner, v] : value.items()) {
                const std::string name = key + "." + inner;
                if (!explicit_fields.count(name)) out.push_back(name);
            }
        } else if (!explicit_fields.count(key)) {
            out.push_back(key);
        }
    }
    return out;
}

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig config;
    config.preset = name;
    if (name == "gaussian-sim") {
        config.env = {"gaussian", 100, 10, -3.0, "", std::nullopt};
        config.rounds = 1000;
        config.runs = 100;
    } else if (name == "mixture-sim") {
        config.env = {"mixture", 100, 10, 0.0, "", std::nullopt};
        config.rounds = 5000;
        config.runs = 100;
    } else if (name == "cluster-sim") {
        config.env = {"cluster", 32, 11, 0.0, "", std::nullopt};
        config.rounds = 1000;
        config.runs = 100;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return config;
}

std::vector<std::string> preset_names() { return {"gaussian-sim", "mixture-sim", "cluster-sim"}; }

std::uint64_t environment_seed(const ExperimentConfig& config) {
    return config.env.seed ? *config.env.seed : derive_seed(config.seed, kEnvStream);
}

Environment build_environment(const ExperimentConfig& config) {
    const std::uint64_t seed = environment_seed(config);
    if (config.env.kind == "gaussian")
        return make_gaussian_env(config.env.arms, config.env.dim, config.env.context_mean, seed);
    if (config.env.kind == "mixture") return make_mixture_env(config.env.arms, config.env.dim, seed);
    if (config.env.kind == "cluster") return EnvBundle::load(config.env.bundle).environment();
    throw ConfigError("unknown environment kind '" + config.env.kind + "'");
}

std::uint64_t run_seed(std::uint64_t master, std::size_t run) { return derive_seed(master, run); }

// ---------------------------------------------------------------------------
// runs

RunRecord simulate_run(const ExperimentConfig& config, const Environment& env, std::size_t run, std::uint64_t seed) {
    RunRecord record;
    record.run = run;
    RandomSource policy_rng(derive_seed(seed, 0));
    RandomSource reward_rng(derive_seed(seed, 1));
    try {
        const auto policy = make_policy(config.policy, env.dim());
        const std::vector<Vector>& contexts = env.contexts();
        for (std::size_t t = 0; t < config.rounds; ++t) {
            const std::size_t arm = policy->select(contexts, policy_rng);
            const int reward = env.step(arm, reward_rng);
            record.trace.record(arm, reward, env.instant_regret(arm));
            policy->observe(contexts[arm], arm, reward);
        }
    } catch (const std::runtime_error& e) {
        record.failed = true;
        record.error = e.what();
    }
    return record;
}

std::vector<RunRecord> simulate_runs(const ExperimentConfig& config, const Environment& env) {
    std::vector<RunRecord> records(config.runs);
    parallel_for(config.runs, config.threads,
                 [&](std::size_t r) { records[r] = simulate_run(config, env, r, run_seed(config.seed, r)); });
    return records;
}

std::vector<RunRecord> replay_runs(const ExperimentConfig& config, std::span<const LogEvent> events) {
    const ReplayPolicyFactory factory =
        config.replay.disjoint ? disjoint_policy_factory(config.policy) : shared_policy_factory(config.policy);
    ReplayOptions options{config.replay.update_batch, config.replay.budget};
    std::vector<RunRecord> records(config.runs);
    parallel_for(config.runs, config.threads, [&](std::size_t r) {
        RunRecord& record = records[r];
        record.run = r;
        RandomSource rng(run_seed(config.seed, r));
        try {
            record.report = replay(factory, events, options, rng);
        } catch (const std::runtime_error& e) {
            record.failed = true;
            record.error = e.what();
        }
    });
    return records;
}

AggregateTable aggregate(std::span<const std::vector<double>> series) {
    AggregateTable table;
    table.series = series.size();
    if (series.empty()) return table;
    const std::size_t length = series.front().size();
    for (const auto& s : series)
        if (s.size() != length) throw AggregationError("aggregate: series lengths differ");
    const double n = static_cast<double>(series.size());
    table.mean.assign(length, 0.0);
    table.stddev.assign(length, 0.0);
    for (std::size_t i = 0; i < length; ++i) {
        double sum = 0.0;
        for (const auto& s : series) sum += s[i];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& s : series) ss += (s[i] - mean) * (s[i] - mean);
        table.mean[i] = mean;
        table.stddev[i] = series.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    return table;
}

void write_simulation_csv(const std::string& path, const RunRecord& record) {
    std::ofstream out = open_output(path);
    out << "run,t,arm,reward,inst_regret,cum_regret\n";
    const RegretTrace& tr = record.trace;
    for (std::size_t t = 0; t < tr.size(); ++t)
        out << record.run << ',' << t + 1 << ',' << tr.arms[t] << ',' << tr.rewards[t] << ','
            << format_double(tr.instant[t]) << ',' << format_double(tr.cumulative[t]) << '\n';
}

void write_replay_csv(const std::string& path, const RunRecord& record) {
    std::ofstream out = open_output(path);
    out << "run,valid_t,arm,reward,ctr\n";
    const ReplayReport& rep = record.report;
    for (std::size_t i = 0; i < rep.ctr_trace.size(); ++i)
        out << record.run << ',' << rep.ctr_trace[i].first << ',' << rep.arms[i] << ',' << rep.rewards[i] << ','
            << format_double(rep.ctr_trace[i].second) << '\n';
}

ExperimentOutput run_experiment(const ExperimentConfig& input) {
    ExperimentConfig config = input;
    config.validate();
    if (config.out_dir.empty()) config.out_dir = default_out_dir();
    const auto started = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);
    const auto path = [&](const std::string& name) { return (fs::path(config.out_dir) / name).string(); };

    ExperimentOutput output;
    json meta;
    std::vector<std::vector<double>> series;
    if (config.command == "simulate") {
        const Environment env = build_environment(config);
        output.records = simulate_runs(config, env);
        for (const auto& rec : output.records) {
            if (rec.failed) continue;
            const std::string file = path(run_file("run", rec.run));
            write_simulation_csv(file, rec);
            output.files.push_back(file);
            series.push_back(rec.trace.cumulative);
        }
        output.table = aggregate(series);
        write_aggregate_csv(path("aggregate.csv"), "t", "cum_regret", output.table);
        meta["environment"] = {{"kind", config.env.kind},
                               {"seed", environment_seed(config)},
                               {"arms", env.arms()},
                               {"dim", env.dim()},
                               {"optimal_arm", env.optimal_arm()},
                               {"optimal_mean", env.optimal_mean()},
                               {"average_mean", env.average_mean()},
                               {"contexts_fixed_across_rounds", true}};
    } else {
        const std::vector<LogEvent> events = read_log_file(config.replay.log);
        output.records = replay_runs(config, events);
        std::size_t shortest = SIZE_MAX;
        for (const auto& rec : output.records) {
            if (rec.failed) continue;
            const std::string file = path(run_file("replay", rec.run));
            write_replay_csv(file, rec);
            output.files.push_back(file);
            std::vector<double> ctr;
            for (const auto& [i, v] : rec.report.ctr_trace) ctr.push_back(v);
            shortest = std::min(shortest, ctr.size());
            series.push_back(std::move(ctr));
        }
        for (auto& s : series) s.resize(shortest);
        output.table = aggregate(series);
        write_aggregate_csv(path("aggregate.csv"), "valid_t", "ctr", output.table);
        json runs = json::array();
        for (const auto& rec : output.records)
            runs.push_back({{"run", rec.run},
                            {"events_seen", rec.report.events_seen},
                            {"valid_events", rec.report.valid_events},
                            {"clicks", rec.report.clicks},
                            {"final_ctr", rec.report.final_ctr}});
        meta["replay"] = {{"events", events.size()},
                          {"aggregate_truncated_to", series.empty() ? 0 : shortest},
                          {"delay_unit", "valid events"},
                          {"estimator", "rejection replay; unbiased only for uniformly logged data"},
                          {"runs", runs}};
    }
    output.files.push_back(path("aggregate.csv"));

    json failed = json::array();
    for (const auto& rec : output.records)
        if (rec.failed) failed.push_back({{"run", rec.run}, {"error", rec.error}});
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    meta["config"] = config.to_json();
    meta["defaulted_fields"] = config.defaulted_fields();
    meta["software_version"] = kVersion;
    meta["wall_clock_seconds"] = elapsed;
    meta["completed_runs"] = output.records.size() - failed.size();
    meta["failed_runs"] = failed;
    meta["run_seed_rule"] = "derive_seed(master_seed, run_index)";
    if (config.policy.name == "glm-ucb")
        meta["notes"] = {"GLM-UCB exploration width rho(t) = alpha * sqrt(log t) and the ridge regularizer are "
                         "this tool's defaults; the method's original settings are not reported."};
    std::ofstream(path("metadata.json")) << meta.dump(2) << '\n';
    output.files.push_back(path("metadata.json"));
    output.metadata = std::move(meta);
    return output;
}

// ---------------------------------------------------------------------------
// sampler diagnostics

bool PgDiagnostics::ok() const {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return !rows.empty();
}

std::vector<double> default_c_grid() { return {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 10.0}; }

PgDiagnostics pg_diagnose(std::span<const double> c_grid, std::size_t n_draws, std::uint64_t seed,
                          const PgSampler& sampler) {
    if (n_draws < 1000) throw InvalidArgument("pg_diagnose: need at least 1000 draws");
    PgDiagnostics out;
    for (std::size_t i = 0; i < c_grid.size(); ++i) {
        const double c = c_grid[i];
        RandomSource rng(derive_seed(seed, i));
        PgCounters counters;
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t n = 0; n < n_draws; ++n) {
            const double x = sampler(c, rng, &counters);
            sum += x;
            sum_sq += x * x;
        }
        const double n = static_cast<double>(n_draws);
        PgDiagnosticRow row;
        row.c = c;
        row.mean = sum / n;
        row.oracle = pg_mean(1, c);
        const double var = std::max(0.0, (sum_sq - n * row.mean * row.mean) / (n - 1.0));
        const double se = std::sqrt(var / n);
        row.z = se > 0.0 ? (row.mean - row.oracle) / se : (row.mean == row.oracle ? 0.0 : INFINITY);
        row.acceptance = counters.acceptance_rate();
        row.pass = row.acceptance >= kMinAcceptance && std::fabs(row.z) <= kMaxAbsZ;
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace pgts
