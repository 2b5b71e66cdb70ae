#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pgts/errors.hpp"
#include "pgts/policies.hpp"

using namespace pgts;

namespace {

std::vector<Vector> contexts_of(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<Vector> out;
    for (const auto& r : rows) {
        Vector v(static_cast<Eigen::Index>(r.size()));
        Eigen::Index j = 0;
        for (double x : r) v[j++] = x;
        out.push_back(v);
    }
    return out;
}

std::vector<Vector> random_contexts(std::size_t k, std::size_t d, RandomSource& rng) {
    std::vector<Vector> out(k, Vector(static_cast<Eigen::Index>(d)));
    for (auto& v : out)
        for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = rng.normal();
    return out;
}

// 1-D design x_i = -2 + 4i/19 used by the Gibbs checks
constexpr std::array<int, 20> kRewards1d{0, 0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1, 1, 1, 1};
constexpr std::array<int, 20> kRewards2d{0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1, 0, 1, 1, 1};

double grid_x(int i) { return -2.0 + 4.0 * i / 19.0; }

struct ChainMoments {
    Vector mean;
    Vector variance;
};

ChainMoments run_chain(const BanditHistory& h, std::uint64_t seed, int warmup, int sweeps) {
    const GaussianPrior prior(GaussianBelief::isotropic(h.dim()));
    RandomSource rng(seed);
    Vector theta = Vector::Zero(static_cast<Eigen::Index>(h.dim()));
    for (int i = 0; i < warmup; ++i) theta = gibbs_sweep(h, theta, prior, rng);
    Vector s = Vector::Zero(theta.size()), s2 = Vector::Zero(theta.size());
    for (int i = 0; i < sweeps; ++i) {
        theta = gibbs_sweep(h, theta, prior, rng);
        s += theta;
        s2 += theta.cwiseProduct(theta);
    }
    const Vector mean = s / sweeps;
    return {mean, s2 / sweeps - mean.cwiseProduct(mean)};
}

}  // namespace

TEST_CASE("sigmoid") {
    CHECK(sigmoid(0.0) == 0.5);
    for (double z : {0.1, 5.0, 50.0}) CHECK(sigmoid(-z) == doctest::Approx(1.0 - sigmoid(z)).epsilon(1e-15));
    CHECK(std::fabs(sigmoid(40.0) - (1.0 - std::exp(-40.0))) <= 1e-15);
    CHECK(sigmoid(-700.0) > 0.0);
    CHECK(sigmoid(700.0) == 1.0);
    CHECK(std::isfinite(sigmoid(-745.0)));
}

TEST_CASE("argmax_index and greedy_arm") {
    const std::vector<double> tied{1.0, 3.0, 3.0};
    CHECK(argmax_index(tied) == 1);
    CHECK_THROWS_AS(argmax_index(std::vector<double>{}), InvalidArgument);
    const auto ctx = contexts_of({{1, 0}, {0, 1}});
    Vector theta(2);
    theta << 2, -1;
    CHECK(greedy_arm(ctx, theta) == 0);
    theta << -2, 1;
    CHECK(greedy_arm(ctx, theta) == 1);
}

TEST_CASE("BanditHistory") {
    BanditHistory h(2);
    CHECK(h.empty());
    Vector x(2);
    x << 1, 2;
    h.append(x, 3, 1);
    CHECK(h.size() == 1);
    CHECK_THROWS_AS(h.append(x, 0, 2), InvalidArgument);
    CHECK_THROWS_AS(h.append(Vector::Ones(3), 0, 1), InvalidArgument);
    CHECK(h.size() == 1);
    for (int i = 0; i < 40; ++i) h.append(Vector::Constant(2, i), static_cast<std::size_t>(i), i % 2);
    REQUIRE(h.size() == 41);
    CHECK(h.contexts()(0, 1) == 2.0);
    CHECK(h.arm(0) == 3);
    for (int i = 0; i < 40; ++i) {
        CHECK(h.contexts()(i + 1, 0) == i);
        CHECK(h.reward(static_cast<std::size_t>(i + 1)) == i % 2);
        CHECK(h.kappa()[i + 1] == (i % 2) - 0.5);
    }
    BanditHistory w(1, 3);
    for (int i = 0; i < 5; ++i) w.append(Vector::Constant(1, i), 0, 1);
    CHECK(w.size() == 3);
    CHECK(w.contexts()(0, 0) == 2.0);
    CHECK(w.contexts()(2, 0) == 4.0);
}

TEST_CASE("gibbs_sweep") {
    BanditHistory h(1);
    for (int i = 0; i < 20; ++i) h.append(Vector::Constant(1, grid_x(i)), 0, kRewards1d[static_cast<std::size_t>(i)]);
    const GaussianPrior prior(GaussianBelief::isotropic(1));

    SUBCASE("one PG draw per history row") {
        RandomSource rng(1);
        PgCounters counters;
        gibbs_sweep(h, Vector::Zero(1), prior, rng, &counters);
        CHECK(counters.acceptances == 20);
    }
    SUBCASE("determinism") {
        RandomSource a(5), b(5);
        CHECK(gibbs_sweep(h, Vector::Constant(1, 0.3), prior, a) == gibbs_sweep(h, Vector::Constant(1, 0.3), prior, b));
    }
    SUBCASE("empty history rejected") {
        RandomSource rng(1);
        CHECK_THROWS_AS(gibbs_sweep(BanditHistory(1), Vector::Zero(1), prior, rng), InvalidArgument);
    }
    SUBCASE("dimension mismatch rejected") {
        RandomSource rng(1);
        CHECK_THROWS_AS(gibbs_sweep(h, Vector::Zero(2), prior, rng), InvalidArgument);
    }
}

TEST_CASE("Gibbs average matches the 1-D quadrature posterior") {
    std::vector<double> xs;
    for (int i = 0; i < 20; ++i) xs.push_back(grid_x(i));
    const auto oracle_moments = oracle::posterior_moments_1d(xs, kRewards1d, 1.0);
    // frozen quadrature values for this data set
    CHECK(oracle_moments.mean[0] == doctest::Approx(1.0364911484).epsilon(1e-8));
    CHECK(oracle_moments.variance[0] == doctest::Approx(0.2008728441).epsilon(1e-8));

    BanditHistory h(1);
    for (int i = 0; i < 20; ++i) h.append(Vector::Constant(1, xs[static_cast<std::size_t>(i)]), 0, kRewards1d[static_cast<std::size_t>(i)]);
    const ChainMoments chain = run_chain(h, 7, 500, 5000);
    CHECK(std::fabs(chain.mean[0] / 1.0364911484 - 1.0) <= 0.05);
    CHECK(std::fabs(chain.variance[0] / 0.2008728441 - 1.0) <= 0.05);
}

TEST_CASE("Gibbs average matches the 2-D grid posterior") {
    std::vector<Eigen::Vector2d> xs;
    for (int i = 0; i < 20; ++i) xs.emplace_back(1.0, grid_x(i));
    const auto oracle_moments = oracle::posterior_moments_2d(xs, kRewards2d, 1.0);
    const std::array<double, 2> mean{0.4071988922, 0.7408999754};
    const std::array<double, 2> var{0.2085797847, 0.1712852653};
    for (int j = 0; j < 2; ++j) {
        CHECK(oracle_moments.mean[static_cast<std::size_t>(j)] == doctest::Approx(mean[static_cast<std::size_t>(j)]).epsilon(1e-6));
        CHECK(oracle_moments.variance[static_cast<std::size_t>(j)] == doctest::Approx(var[static_cast<std::size_t>(j)]).epsilon(1e-6));
    }

    BanditHistory h(2);
    for (int i = 0; i < 20; ++i) h.append(Vector(xs[static_cast<std::size_t>(i)]), 0, kRewards2d[static_cast<std::size_t>(i)]);
    const ChainMoments chain = run_chain(h, 7, 500, 5000);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::fabs(chain.mean[j] / mean[static_cast<std::size_t>(j)] - 1.0) <= 0.08);
        CHECK(std::fabs(chain.variance[j] / var[static_cast<std::size_t>(j)] - 1.0) <= 0.08);
    }
}

TEST_CASE("PgTsPolicy") {
    PgTsConfig cfg{GaussianBelief::isotropic(2), 5, 0};
    SUBCASE("single arm and ties") {
        PgTsPolicy p(cfg);
        RandomSource rng(1);
        CHECK(p.select(contexts_of({{0.3, 0.4}}), rng) == 0);
        CHECK(p.select(contexts_of({{1, 1}, {1, 1}}), rng) == 0);
    }
    SUBCASE("empty contexts rejected") {
        PgTsPolicy p(cfg);
        RandomSource rng(1);
        CHECK_THROWS_AS(p.select(std::vector<Vector>{}, rng), InvalidArgument);
        CHECK_THROWS_AS(p.select(contexts_of({{1, 2, 3}}), rng), InvalidArgument);
    }
    SUBCASE("observe") {
        PgTsPolicy p(cfg);
        p.observe(Vector::Ones(2), 0, 1);
        CHECK(p.history_size() == 1);
        CHECK_THROWS_AS(p.observe(Vector::Ones(2), 0, 2), InvalidArgument);
        for (int i = 0; i < 9; ++i) p.observe(Vector::Constant(2, i), 1, 0);
        CHECK(p.history_size() == 10);
        CHECK(p.history().contexts()(9, 0) == 8.0);
    }
    SUBCASE("select leaves history untouched") {
        PgTsPolicy p(cfg);
        RandomSource rng(3);
        const auto ctx = random_contexts(4, 2, rng);
        for (int t = 0; t < 10; ++t) {
            const auto before = p.state_digest();
            const std::size_t a = p.select(ctx, rng);
            CHECK(a < 4);
            CHECK(p.state_digest() == before);
            CHECK(p.history_size() == static_cast<std::size_t>(t));
            p.observe(ctx[a], a, t % 3 == 0 ? 1 : 0);
        }
    }
    SUBCASE("empty history draws from the prior") {
        PgTsPolicy p(PgTsConfig{GaussianBelief::isotropic(2, 3.0, 1e-12), 100, 0});
        RandomSource rng(2);
        p.advance(rng);
        CHECK(p.counters().proposals == 0);
        CHECK((p.theta() - Vector::Constant(2, 3.0)).cwiseAbs().maxCoeff() < 1e-4);
    }
    SUBCASE("M sweeps per round with warm start") {
        PgTsPolicy p(cfg);
        p.observe(Vector::Ones(2), 0, 1);
        p.observe(-Vector::Ones(2), 1, 0);
        p.observe(Vector::Constant(2, 0.5), 1, 1);
        RandomSource rng(4);
        p.advance(rng);
        CHECK(p.counters().acceptances == 5 * 3);

        // manual replay of the chain from the same stream
        PgTsPolicy q(cfg);
        q.observe(Vector::Ones(2), 0, 1);
        q.observe(-Vector::Ones(2), 1, 0);
        q.observe(Vector::Constant(2, 0.5), 1, 1);
        RandomSource r1(11), r2(11);
        q.advance(r1);
        const Vector start = q.theta();
        q.advance(r1);
        const GaussianPrior prior(cfg.prior);
        Vector theta = start;
        // r2 must first reproduce the first advance
        PgTsPolicy fresh(cfg);
        fresh.observe(Vector::Ones(2), 0, 1);
        fresh.observe(-Vector::Ones(2), 1, 0);
        fresh.observe(Vector::Constant(2, 0.5), 1, 1);
        fresh.advance(r2);
        for (int m = 0; m < 5; ++m) theta = gibbs_sweep(fresh.history(), theta, prior, r2);
        CHECK((theta - q.theta()).norm() == 0.0);
    }
    SUBCASE("stream is M = 1") {
        PolicySpec spec;
        spec.name = "pg-ts-stream";
        auto stream = make_policy(spec, 2);
        CHECK(stream->name() == "pg-ts-stream");
        const auto& sc = dynamic_cast<PgTsPolicy&>(*stream).config();
        CHECK(sc == PgTsConfig{GaussianBelief::isotropic(2), 1, 0});
        spec.name = "pg-ts";
        spec.burn_in = 1;
        auto one = make_policy(spec, 2);
        CHECK(dynamic_cast<PgTsPolicy&>(*one).config() == sc);
        CHECK(one->name() == "pg-ts-stream");
    }
    SUBCASE("M = 0 rejected") { CHECK_THROWS_AS(PgTsPolicy(PgTsConfig{GaussianBelief::isotropic(2), 0, 0}), InvalidArgument); }
}

TEST_CASE("argmax is invariant to positive scaling of theta") {
    RandomSource rng(21);
    for (int rep = 0; rep < 200; ++rep) {
        const auto ctx = random_contexts(6, 3, rng);
        Vector theta(3);
        for (Eigen::Index j = 0; j < 3; ++j) theta[j] = rng.normal();
        const std::size_t a = greedy_arm(ctx, theta);
        for (double s : {1e-3, 0.5, 7.0, 1e3}) CHECK(greedy_arm(ctx, s * theta) == a);
    }
}

TEST_CASE("laplace_fit_step") {
    SUBCASE("zero context returns m") {
        LaplaceState s{Vector::Constant(3, 0.7), Vector::Constant(3, 2.0)};
        CHECK(laplace_fit_step(s, Vector::Zero(3), 1) == s.m);
    }
    SUBCASE("1-D example against a fine grid") {
        const LaplaceState s = LaplaceState::initial(1);
        const Vector w = laplace_fit_step(s, Vector::Ones(1), 1);
        // brute force on [-5, 5] with step 1e-6
        double best = 0.0, best_f = 1e300;
        for (long k = 0; k <= 10000000; ++k) {
            const double v = -5.0 + k * 1e-6;
            const double f = 0.5 * v * v - oracle::log_likelihood(v, 1);
            if (f < best_f) best_f = f, best = v;
        }
        CHECK(std::fabs(w[0] - best) <= 1e-5);
    }
    SUBCASE("gradient at the solution") {
        RandomSource rng(8);
        for (int rep = 0; rep < 30; ++rep) {
            const Eigen::Index d = 1 + rep % 5;
            LaplaceState s{Vector(d), Vector(d)};
            Vector x(d);
            for (Eigen::Index j = 0; j < d; ++j) {
                s.m[j] = 2.0 * rng.normal();
                s.q[j] = 0.1 + 3.0 * rng.uniform();
                x[j] = 3.0 * rng.normal();
            }
            const int y = rep % 2 ? 1 : -1;
            const Vector w = laplace_fit_step(s, x, y);
            const Vector grad = s.q.cwiseProduct(w - s.m) - y * (1.0 - oracle::logistic(y * x.dot(w))) * x;
            CHECK(grad.norm() <= 1e-8);
        }
    }
    SUBCASE("matches the grid oracle on random 1-D and 2-D instances") {
        RandomSource rng(2718);
        for (int rep = 0; rep < 50; ++rep) {
            const Eigen::Index d = 1 + rep % 2;
            LaplaceState s{Vector(d), Vector(d)};
            Vector x(d);
            for (Eigen::Index j = 0; j < d; ++j) {
                s.m[j] = rng.normal();
                s.q[j] = 0.5 + 2.0 * rng.uniform();
                x[j] = 2.0 * rng.normal();
            }
            const int y = rng.uniform() < 0.5 ? 1 : -1;
            const Vector w = laplace_fit_step(s, x, y);
            const Vector g = oracle::laplace_grid_minimizer(s.m, s.q, x, y);
            CAPTURE(rep);
            CHECK((w - g).cwiseAbs().maxCoeff() <= 1e-4);
        }
    }
    SUBCASE("invalid input") {
        const LaplaceState s = LaplaceState::initial(2);
        CHECK_THROWS_AS(laplace_fit_step(s, Vector::Ones(3), 1), InvalidArgument);
        CHECK_THROWS_AS(laplace_fit_step(s, Vector::Ones(2), 0), InvalidArgument);
        CHECK_THROWS_AS(laplace_fit_step(LaplaceState{Vector::Zero(2), Vector::Zero(2)}, Vector::Ones(2), 1),
                        InvalidArgument);
    }
}

TEST_CASE("laplace_update and selection") {
    SUBCASE("zero context leaves the state unchanged") {
        const LaplaceState s{Vector::Constant(2, 0.3), Vector::Constant(2, 1.5)};
        const LaplaceState u = laplace_update(s, Vector::Zero(2), 1);
        CHECK(u.m == s.m);
        CHECK(u.q == s.q);
    }
    SUBCASE("q is non-decreasing and matches p(1-p)x^2") {
        RandomSource rng(13);
        LaplaceState s = LaplaceState::initial(3);
        for (int t = 0; t < 100; ++t) {
            Vector x(3);
            for (Eigen::Index j = 0; j < 3; ++j) x[j] = rng.normal();
            const int r = rng.bernoulli(0.4) ? 1 : 0;
            const LaplaceState u = laplace_update(s, x, r);
            const double p = oracle::logistic(x.dot(u.m));
            for (Eigen::Index j = 0; j < 3; ++j) {
                CHECK(u.q[j] >= s.q[j]);
                CHECK(u.q[j] == doctest::Approx(s.q[j] + p * (1 - p) * x[j] * x[j]).epsilon(1e-12));
            }
            s = u;
        }
    }
    SUBCASE("unit precision at initialization") {
        const LaplaceState s = LaplaceState::initial(4);
        CHECK(s.q == Vector::Ones(4));
        CHECK(s.m == Vector::Zero(4));
    }
    SUBCASE("vanishing noise is greedy under m") {
        RandomSource rng(4);
        for (int rep = 0; rep < 50; ++rep) {
            LaplaceState s{Vector(3), Vector::Constant(3, 1e12)};
            for (Eigen::Index j = 0; j < 3; ++j) s.m[j] = rng.normal();
            const auto ctx = random_contexts(5, 3, rng);
            CHECK(laplace_select_arm(s, ctx, rng) == greedy_arm(ctx, s.m));
        }
    }
    SUBCASE("single arm, determinism and empty input") {
        const LaplaceState s = LaplaceState::initial(2);
        RandomSource rng(1);
        CHECK(laplace_select_arm(s, contexts_of({{5, 5}}), rng) == 0);
        RandomSource a(9), b(9);
        const auto ctx = random_contexts(8, 2, a);
        random_contexts(8, 2, b);
        for (int i = 0; i < 20; ++i) CHECK(laplace_select_arm(s, ctx, a) == laplace_select_arm(s, ctx, b));
        CHECK_THROWS_AS(laplace_select_arm(s, std::vector<Vector>{}, rng), InvalidArgument);
    }
    SUBCASE("update rejects invalid rewards") {
        CHECK_THROWS_AS(laplace_update(LaplaceState::initial(1), Vector::Ones(1), -1), InvalidArgument);
    }
}

TEST_CASE("glm_mle") {
    SUBCASE("empty history") { CHECK(glm_mle(BanditHistory(3), 1.0) == Vector::Zero(3)); }
    SUBCASE("separable data stays finite") {
        BanditHistory h(2);
        h.append(contexts_of({{1, 1}})[0], 0, 1);
        h.append(contexts_of({{-1, -1}})[0], 1, 0);
        const Vector theta = glm_mle(h, 1.0);
        CHECK(theta.allFinite());
        Vector grad = theta;
        for (std::size_t i = 0; i < h.size(); ++i) {
            const Vector x = h.contexts().row(static_cast<Eigen::Index>(i)).transpose();
            grad -= (h.reward(i) - oracle::logistic(x.dot(theta))) * x;
        }
        CHECK(grad.norm() <= 1e-8);
    }
    SUBCASE("balanced data gives a zero logit") {
        BanditHistory h(1);
        for (int i = 0; i < 10; ++i) {
            h.append(Vector::Ones(1), 0, 1);
            h.append(Vector::Ones(1), 0, 0);
        }
        CHECK(std::fabs(glm_mle(h, 1e-6)[0]) <= 1e-3);
    }
    SUBCASE("recovers the logit of the empirical rate") {
        BanditHistory h(1);
        for (int i = 0; i < 30; ++i) h.append(Vector::Ones(1), 0, i % 3 == 0 ? 0 : 1);
        CHECK(glm_mle(h, 1e-8)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-5));
    }
}

TEST_CASE("GLM-UCB") {
    const auto ctx = contexts_of({{1, 0}, {0, 2}, {0.5, 0.5}});
    SUBCASE("alpha = 0 is greedy under the MLE") {
        GlmUcbState st{BanditHistory(2), 0.0, 1.0};
        st.history.append(ctx[0], 0, 1);
        st.history.append(ctx[1], 1, 0);
        st.history.append(ctx[0], 0, 1);
        CHECK(glmucb_select_arm(st, ctx, 10) == greedy_arm(ctx, glm_mle(st.history, 1.0)));
    }
    SUBCASE("empty history picks the largest norm") {
        GlmUcbState st{BanditHistory(2), 1.0, 1.0};
        CHECK(glmucb_select_arm(st, ctx, 5) == 1);
        const auto s = glmucb_scores(Vector::Zero(2), Matrix::Identity(2, 2), ctx, 5, 1.0);
        CHECK(s[1] == doctest::Approx(0.5 + std::sqrt(std::log(5.0)) * 2.0));
    }
    SUBCASE("round below one rejected") {
        GlmUcbState st{BanditHistory(2), 1.0, 1.0};
        CHECK_THROWS_AS(glmucb_select_arm(st, ctx, 0), InvalidArgument);
    }
    SUBCASE("bonus shrinks as a context repeats") {
        RandomSource rng(17);
        for (int rep = 0; rep < 20; ++rep) {
            const auto c = random_contexts(1, 3, rng);
            BanditHistory h(3);
            double prev = 1e300;
            for (int i = 0; i < 15; ++i) {
                const Matrix m = glm_design(h, 1.0);
                const double bonus = std::sqrt(c[0].dot(m.inverse() * c[0]));
                CHECK(bonus <= prev + 1e-15);
                prev = bonus;
                h.append(c[0], 0, i % 2);
            }
        }
    }
    SUBCASE("policy matches the free function with t = number of selects") {
        RandomSource env(3);
        const auto arms = random_contexts(5, 3, env);
        GlmUcbPolicy p(3, 1.0, 1.0);
        GlmUcbState st{BanditHistory(3), 1.0, 1.0};
        RandomSource rng(1);
        for (long t = 1; t <= 40; ++t) {
            const std::size_t a = p.select(arms, rng);
            CHECK(a == glmucb_select_arm(st, arms, t));
            const int r = env.bernoulli(0.3) ? 1 : 0;
            p.observe(arms[a], a, r);
            st.history.append(arms[a], a, r);
        }
    }
}

TEST_CASE("uniform_select_arm") {
    RandomSource rng(1);
    CHECK(uniform_select_arm(contexts_of({{1}}), rng) == 0);
    CHECK_THROWS_AS(uniform_select_arm(std::vector<Vector>{}, rng), InvalidArgument);
    const auto ctx = contexts_of({{1}, {2}, {3}, {4}});
    std::array<int, 4> counts{};
    for (int i = 0; i < 100000; ++i) ++counts[uniform_select_arm(ctx, rng)];
    for (int c : counts) CHECK(std::fabs(c / 1e5 - 0.25) <= 0.01);
    RandomSource a(5), b(5);
    for (int i = 0; i < 50; ++i) CHECK(uniform_select_arm(ctx, a) == uniform_select_arm(ctx, b));
}

TEST_CASE("policy interface law") {
    for (const char* name : {"pg-ts", "pg-ts-stream", "laplace-ts", "glm-ucb", "uniform"}) {
        CAPTURE(name);
        PolicySpec spec;
        spec.name = name;
        spec.burn_in = 3;
        auto p = make_policy(spec, 3);
        CHECK(p->name() == name);
        RandomSource rng(99);
        const auto ctx = random_contexts(7, 3, rng);
        for (std::size_t t = 0; t < 15; ++t) {
            const auto before = p->state_digest();
            const std::size_t a = p->select(ctx, rng);
            CHECK(a < ctx.size());
            CHECK(p->state_digest() == before);
            CHECK(p->history_size() == t);
            p->observe(ctx[a], a, rng.bernoulli(0.5) ? 1 : 0);
            CHECK(p->history_size() == t + 1);
        }
    }
    PolicySpec bad;
    bad.name = "nope";
    CHECK_FALSE(is_known_policy("nope"));
    CHECK_THROWS_AS(make_policy(bad, 2), InvalidArgument);
}
