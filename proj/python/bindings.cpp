#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pgts/errors.hpp"
#include "pgts/experiment.hpp"
#include "pgts/gauss.hpp"
#include "pgts/ingest.hpp"
#include "pgts/policies.hpp"
#include "pgts/polya_gamma.hpp"
#include "pgts/replay.hpp"

namespace py = pybind11;
using namespace pgts;

namespace {

py::array_t<double> pg_draws(int b, double c, std::size_t n, std::uint64_t seed) {
    const PolyaGammaParams params{b, c};
    params.validate();
    RandomSource rng(seed);
    py::array_t<double> out(static_cast<py::ssize_t>(n));
    auto view = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < n; ++i) view(static_cast<py::ssize_t>(i)) = sample_pg(params, rng);
    return out;
}

ExperimentConfig simulate_config(const std::string& preset, const std::string& policy, std::size_t runs,
                                 std::size_t rounds, std::uint64_t seed, std::optional<std::uint64_t> env_seed,
                                 int burn_in, const std::string& env_bundle) {
    ExperimentConfig c = preset_config(preset);
    c.policy.name = policy;
    c.policy.burn_in = burn_in;
    c.runs = runs;
    c.rounds = rounds;
    c.seed = seed;
    c.env.seed = env_seed;
    c.env.bundle = env_bundle;
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_pgts, m) {
    m.doc() = "Polya-Gamma augmented Thompson sampling";
    m.attr("__version__") = kVersion;

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FactorizationError>(m, "FactorizationError", PyExc_ArithmeticError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);

    m.def("sample_pg", &pg_draws, py::arg("b"), py::arg("c"), py::arg("n"), py::arg("seed") = 1,
          "n independent PG(b, c) draws");
    m.def("pg_mean", &pg_mean, py::arg("b"), py::arg("c"), py::arg("terms") = 1000000);

    m.def(
        "pg_conditional_posterior",
        [](const Matrix& X, const Vector& kappa, const Vector& omega, const Vector& b, const Matrix& B) {
            const GaussianBelief post = pg_conditional_posterior(DesignBundle{X, kappa, omega}, GaussianBelief{b, B});
            return py::make_tuple(post.mean, post.covariance);
        },
        py::arg("X"), py::arg("kappa"), py::arg("omega"), py::arg("prior_mean"), py::arg("prior_cov"),
        "(mean, covariance) of theta given Polya-Gamma weights");

    m.def("sigmoid", &sigmoid);
    m.def(
        "laplace_fit_step",
        [](const Vector& m_, const Vector& q, const Vector& x, int y) { return laplace_fit_step({m_, q}, x, y); },
        py::arg("m"), py::arg("q"), py::arg("x"), py::arg("y"));

    m.def(
        "gaussian_env",
        [](std::size_t arms, std::size_t d, double mean, std::uint64_t seed) {
            const Environment env = make_gaussian_env(arms, d, mean, seed);
            return py::make_tuple(env.contexts(), env.theta_star(), env.arm_means());
        },
        py::arg("arms") = 100, py::arg("d") = 10, py::arg("context_mean") = -3.0, py::arg("seed") = 1,
        "(contexts, theta_star, arm_means)");
    m.def(
        "mixture_env",
        [](std::size_t arms, std::size_t d, std::uint64_t seed) {
            const Environment env = make_mixture_env(arms, d, seed);
            return py::make_tuple(env.contexts(), env.theta_star(), env.arm_means());
        },
        py::arg("arms") = 100, py::arg("d") = 10, py::arg("seed") = 1);

    m.def(
        "simulate",
        [](const std::string& preset, const std::string& policy, std::size_t runs, std::size_t rounds,
           std::uint64_t seed, std::optional<std::uint64_t> env_seed, int burn_in, const std::string& env_bundle) {
            const ExperimentConfig c = simulate_config(preset, policy, runs, rounds, seed, env_seed, burn_in, env_bundle);
            std::vector<RunRecord> records;
            {
                py::gil_scoped_release release;
                records = simulate_runs(c, build_environment(c));
            }
            Matrix regret(static_cast<Eigen::Index>(runs), static_cast<Eigen::Index>(rounds));
            regret.setConstant(std::numeric_limits<double>::quiet_NaN());
            for (const auto& r : records)
                if (!r.failed)
                    for (std::size_t t = 0; t < rounds; ++t)
                        regret(static_cast<Eigen::Index>(r.run), static_cast<Eigen::Index>(t)) = r.trace.cumulative[t];
            return regret;
        },
        py::arg("preset") = "gaussian-sim", py::arg("policy") = "pg-ts", py::arg("runs") = 1, py::arg("rounds") = 100,
        py::arg("seed") = 1, py::arg("env_seed") = py::none(), py::arg("burn_in") = 100, py::arg("env_bundle") = "",
        "cumulative regret, one row per run");

    m.def(
        "synthetic_log",
        [](std::size_t arms, std::size_t d, const Vector& theta, std::size_t n, std::uint64_t seed) {
            std::vector<std::string> lines;
            for (const auto& e : generate_synthetic_log(arms, d, theta, n, seed)) lines.push_back(serialize_event(e));
            return lines;
        },
        py::arg("arms"), py::arg("d"), py::arg("theta"), py::arg("n"), py::arg("seed") = 1,
        "canonical JSON lines");
    m.def(
        "replay",
        [](const std::string& log_path, const std::string& policy, std::size_t update_batch,
           std::optional<std::size_t> budget, bool disjoint, std::uint64_t seed) {
            const auto events = read_log_file(log_path);
            PolicySpec spec;
            spec.name = policy;
            const auto factory = disjoint ? disjoint_policy_factory(spec) : shared_policy_factory(spec);
            RandomSource rng(seed);
            const ReplayReport r = replay(factory, events, ReplayOptions{update_batch, budget}, rng);
            py::dict out;
            out["events_seen"] = r.events_seen;
            out["valid_events"] = r.valid_events;
            out["clicks"] = r.clicks;
            out["ctr"] = r.final_ctr;
            out["arms"] = r.arms;
            return out;
        },
        py::arg("log"), py::arg("policy") = "pg-ts", py::arg("update_batch") = 100, py::arg("budget") = py::none(),
        py::arg("disjoint") = true, py::arg("seed") = 1);

    m.def(
        "prep_dataset",
        [](const std::string& data, const std::string& schema, const std::string& positive_class, std::size_t k,
           std::size_t batch_size, std::size_t iterations, std::uint64_t seed) {
            const EnvBundle b = prep_dataset({data, schema, positive_class, {k, batch_size, iterations, seed}});
            return py::make_tuple(b.centroids, b.rates);
        },
        py::arg("data"), py::arg("schema"), py::arg("positive_class") = "Spruce/Fir", py::arg("k") = 32,
        py::arg("batch_size") = 1024, py::arg("iterations") = 200, py::arg("seed") = 1, "(centroids, rates)");
    m.def("write_synthetic_cover", &write_synthetic_cover, py::arg("csv"), py::arg("schema"), py::arg("rows"),
          py::arg("seed") = 1);

    m.def(
        "pg_diagnose",
        [](std::vector<double> grid, std::size_t draws, std::uint64_t seed) {
            const PgDiagnostics d = pg_diagnose(grid, draws, seed);
            py::list rows;
            for (const auto& r : d.rows)
                rows.append(py::dict(py::arg("c") = r.c, py::arg("mean") = r.mean, py::arg("oracle") = r.oracle,
                                     py::arg("z") = r.z, py::arg("acceptance") = r.acceptance, py::arg("ok") = r.pass));
            return py::make_tuple(d.ok(), rows);
        },
        py::arg("grid") = default_c_grid(), py::arg("draws") = 100000, py::arg("seed") = 1);
}
