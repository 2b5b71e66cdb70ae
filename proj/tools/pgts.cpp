#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgts/errors.hpp"
#include "pgts/experiment.hpp"
#include "pgts/ingest.hpp"
#include "pgts/replay.hpp"

using namespace pgts;

namespace {

struct PolicyFlags {
    std::string names;
    std::optional<double> prior_mean, prior_variance, lambda, alpha, regularizer;
    std::optional<int> burn_in;
    std::optional<std::size_t> window;

    void add(CLI::App* cmd) {
        cmd->add_option("--policy", names, "pg-ts | pg-ts-stream | laplace-ts | glm-ucb | uniform (comma list allowed)");
        cmd->add_option("--burn-in", burn_in, "Gibbs sweeps per round (M)");
        cmd->add_option("--prior-mean", prior_mean);
        cmd->add_option("--prior-variance", prior_variance);
        cmd->add_option("--lambda", lambda, "Laplace-TS initial precision");
        cmd->add_option("--alpha", alpha, "GLM-UCB exploration scale");
        cmd->add_option("--regularizer", regularizer, "GLM-UCB ridge term");
        cmd->add_option("--window", window, "keep only the most recent observations (0 = all)");
    }

    void apply(ExperimentConfig& c) const {
        auto set = [&](const auto& opt, auto& field, const char* name) {
            if (opt) {
                field = *opt;
                c.mark(name);
            }
        };
        set(prior_mean, c.policy.prior_mean, "policy.prior_mean");
        set(prior_variance, c.policy.prior_variance, "policy.prior_variance");
        set(burn_in, c.policy.burn_in, "policy.burn_in");
        set(lambda, c.policy.lambda, "policy.lambda");
        set(alpha, c.policy.alpha, "policy.alpha");
        set(regularizer, c.policy.regularizer, "policy.regularizer");
        set(window, c.policy.window, "policy.window");
    }

    std::vector<std::string> list(const ExperimentConfig& c) const {
        if (names.empty()) return {c.policy.name};
        std::vector<std::string> out;
        std::stringstream ss(names);
        for (std::string item; std::getline(ss, item, ',');)
            if (!item.empty()) out.push_back(item);
        return out;
    }
};

struct RunFlags {
    std::string config_path;
    std::optional<std::size_t> runs, rounds, threads;
    std::optional<std::uint64_t> seed;
    std::string out;

    void add(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config; flags override its fields")->check(CLI::ExistingFile);
        cmd->add_option("--runs", runs);
        cmd->add_option("--rounds", rounds);
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--out", out, "output directory (default $PGTS_OUT_DIR or ./pgts-out)");
        cmd->add_option("--threads", threads, "parallel runs");
    }

    void apply(ExperimentConfig& c) const {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            nlohmann::json doc;
            try {
                in >> doc;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("cannot parse '" + config_path + "': " + e.what());
            }
            c.merge_json(doc);
        }
        if (runs) c.runs = *runs, c.mark("runs");
        if (rounds) c.rounds = *rounds, c.mark("rounds");
        if (seed) c.seed = *seed, c.mark("seed");
        if (threads) c.threads = *threads, c.mark("threads");
        if (!out.empty()) c.out_dir = out, c.mark("out");
    }
};

// One subdirectory per policy when several are compared.
std::string policy_out_dir(const std::string& out, const std::string& policy) {
    std::string base = out;
    if (base.empty()) {
        const char* env = std::getenv("PGTS_OUT_DIR");
        base = env && *env ? env : "pgts-out";
    }
    return base + "/" + policy;
}

void report(const ExperimentOutput& out, const ExperimentConfig& c) {
    std::size_t failed = 0;
    for (const auto& r : out.records) failed += r.failed;
    if (!out.table.mean.empty())
        std::printf("%-13s runs=%zu failed=%zu final mean=%.4f sd=%.4f\n", c.policy.name.c_str(), out.records.size(),
                    failed, out.table.mean.back(), out.table.stddev.back());
    else
        std::printf("%-13s runs=%zu failed=%zu (no completed runs)\n", c.policy.name.c_str(), out.records.size(), failed);
    for (const auto& r : out.records)
        if (r.failed) std::fprintf(stderr, "run %zu failed: %s\n", r.run, r.error.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polya-Gamma Thompson sampling experiments"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a simulated bandit experiment");
    std::string preset = "gaussian-sim";
    std::string env_bundle;
    std::optional<std::uint64_t> env_seed;
    PolicyFlags sim_policy;
    RunFlags sim_run;
    sim->add_option("--preset", preset, "gaussian-sim | mixture-sim | cluster-sim");
    sim->add_option("--env-bundle", env_bundle, "environment bundle from prep-dataset (cluster-sim)");
    sim->add_option("--env-seed", env_seed, "seed for the environment draw");
    sim_policy.add(sim);
    sim_run.add(sim);

    // replay
    auto* rep = app.add_subcommand("replay", "offline replay evaluation over a JSON-lines log");
    std::string log_path;
    std::optional<std::size_t> batch, budget;
    bool shared = false;
    PolicyFlags rep_policy;
    RunFlags rep_run;
    rep->add_option("--log", log_path, "JSON-lines event log")->required()->check(CLI::ExistingFile);
    rep->add_option("--batch", batch, "valid events per delayed update");
    rep->add_option("--budget", budget, "stop after this many valid events");
    rep->add_flag("--shared", shared, "one model for all arms instead of one per arm");
    rep_policy.add(rep);
    rep_run.add(rep);

    // prep-dataset
    auto* prep = app.add_subcommand("prep-dataset", "cluster a labeled table into an environment bundle");
    PrepOptions prep_opts;
    prep_opts.positive_class = "Spruce/Fir";
    prep_opts.kmeans.seed = 1;
    std::string bundle_out = "env_bundle.json";
    prep->add_option("--data", prep_opts.data_path, "CSV with a header row")->required()->check(CLI::ExistingFile);
    prep->add_option("--schema", prep_opts.schema_path, "JSON schema")->required()->check(CLI::ExistingFile);
    prep->add_option("--positive-class", prep_opts.positive_class);
    prep->add_option("--k", prep_opts.kmeans.k);
    prep->add_option("--batch-size", prep_opts.kmeans.batch_size);
    prep->add_option("--iterations", prep_opts.kmeans.iterations);
    prep->add_option("--seed", prep_opts.kmeans.seed);
    prep->add_option("--out", bundle_out, "bundle path");

    // pg-diagnose
    auto* diag = app.add_subcommand("pg-diagnose", "check the Polya-Gamma sampler against its series mean");
    std::vector<double> c_grid = default_c_grid();
    std::size_t draws = 100000;
    std::uint64_t diag_seed = 1;
    diag->add_option("--c", c_grid, "tilt values")->delimiter(',');
    diag->add_option("--draws", draws)->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 40));
    diag->add_option("--seed", diag_seed);

    // gen-log
    auto* glog = app.add_subcommand("gen-log", "write a uniformly logged synthetic event log");
    std::size_t log_arms = 5, log_dim = 6, log_events = 100000;
    std::uint64_t log_seed = 1;
    std::string log_out = "events.jsonl";
    glog->add_option("--arms", log_arms);
    glog->add_option("--dim", log_dim);
    glog->add_option("--events", log_events);
    glog->add_option("--seed", log_seed);
    glog->add_option("--out", log_out);

    // gen-dataset
    auto* gdata = app.add_subcommand("gen-dataset", "write a synthetic labeled table and its schema");
    std::size_t data_rows = 10000;
    std::uint64_t data_seed = 1;
    std::string data_out = "synthetic_cover.csv", schema_out = "synthetic_cover.schema.json";
    gdata->add_option("--rows", data_rows);
    gdata->add_option("--seed", data_seed);
    gdata->add_option("--out", data_out);
    gdata->add_option("--schema-out", schema_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed() || rep->parsed()) {
            const bool is_sim = sim->parsed();
            ExperimentConfig base;
            if (is_sim) {
                base = preset_config(preset);
                if (sim->count("--preset")) base.mark("preset");
            } else {
                base.command = "replay";
                base.runs = 1;
            }
            RunFlags& run = is_sim ? sim_run : rep_run;
            PolicyFlags& pol = is_sim ? sim_policy : rep_policy;
            run.apply(base);
            pol.apply(base);
            if (is_sim) {
                if (!env_bundle.empty()) base.env.bundle = env_bundle, base.mark("env.bundle");
                if (env_seed) base.env.seed = *env_seed, base.mark("env.seed");
            } else {
                base.replay.log = log_path;
                base.mark("replay.log");
                if (batch) base.replay.update_batch = *batch, base.mark("replay.update_batch");
                if (budget) base.replay.budget = *budget, base.mark("replay.budget");
                if (shared) base.replay.disjoint = false, base.mark("replay.disjoint");
            }
            const auto policies = pol.list(base);
            for (const auto& name : policies) {
                ExperimentConfig c = base;
                c.policy.name = name;
                if (!pol.names.empty()) c.mark("policy.name");
                if (policies.size() > 1) c.out_dir = policy_out_dir(c.out_dir, name);
                report(run_experiment(c), c);
            }
            return 0;
        }
        if (prep->parsed()) {
            const EnvBundle bundle = prep_dataset(prep_opts);
            bundle.save(bundle_out);
            const auto [lo, hi] = std::minmax_element(bundle.rates.begin(), bundle.rates.end());
            std::printf("wrote %s: %zu arms, %zu features, rates %.3f..%.3f\n", bundle_out.c_str(),
                        bundle.centroids.size(), static_cast<std::size_t>(bundle.centroids.front().size()), *lo, *hi);
            return 0;
        }
        if (diag->parsed()) {
            const PgDiagnostics d = pg_diagnose(c_grid, draws, diag_seed);
            std::printf("%8s %12s %12s %8s %10s %s\n", "c", "mean", "oracle", "z", "accept", "status");
            for (const auto& r : d.rows)
                std::printf("%8g %12.6f %12.6f %8.2f %10.6f %s\n", r.c, r.mean, r.oracle, r.z, r.acceptance,
                            r.pass ? "ok" : "FAIL");
            return d.ok() ? 0 : 1;
        }
        if (glog->parsed()) {
            RandomSource rng(derive_seed(log_seed, 0));
            Vector theta(static_cast<Eigen::Index>(log_dim));
            for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] = rng.normal();
            const auto events = generate_synthetic_log(log_arms, log_dim, theta, log_events, derive_seed(log_seed, 1));
            std::ofstream out(log_out);
            if (!out) throw ConfigError("cannot write '" + log_out + "'");
            write_log(out, events);
            std::printf("wrote %zu events to %s\n", events.size(), log_out.c_str());
            return 0;
        }
        if (gdata->parsed()) {
            write_synthetic_cover(data_out, schema_out, data_rows, data_seed);
            std::printf("wrote %zu rows to %s and schema %s\n", data_rows, data_out.c_str(), schema_out.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pgts: %s\n", e.what());
        return 2;
    }
    return 0;
}
