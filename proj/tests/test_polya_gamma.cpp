#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "pgts/errors.hpp"
#include "pgts/polya_gamma.hpp"

using namespace pgts;

namespace {

struct Summary {
    double mean;
    double se;
};

Summary summarize(const std::vector<double>& v) {
    double s = 0.0, ss = 0.0;
    for (double x : v) s += x, ss += x * x;
    const double n = static_cast<double>(v.size());
    const double mean = s / n;
    return {mean, std::sqrt((ss - n * mean * mean) / (n - 1.0) / n)};
}

std::vector<double> draws(double c, std::size_t n, std::uint64_t seed, PgCounters* counters = nullptr) {
    RandomSource rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = sample_pg1(c, rng, counters);
    return out;
}

}  // namespace

TEST_CASE("pg_mean series oracle") {
    CHECK(std::fabs(pg_mean(1, 0.0, 1000000) - 0.25) <= 1e-5);
    CHECK(std::fabs(pg_mean(2, 0.0, 1000000) - 0.5) <= 2e-5);
    for (double c : {0.3, 2.0, 7.5}) CHECK(pg_mean(1, c, 1000000) == pg_mean(1, -c, 1000000));
    // E[PG(1,c)] = tanh(c/2) / (2c)
    CHECK(std::fabs(pg_mean(1, 3.0) - std::tanh(1.5) / 6.0) < 1e-6);
    CHECK_THROWS_AS(pg_mean(1, 0.0, 0), InvalidArgument);
    CHECK_THROWS_AS(pg_mean(0, 0.0, 10), InvalidArgument);
}

TEST_CASE("sample_pg1 moments") {
    SUBCASE("c = 0 mean is 1/4") {
        const Summary s = summarize(draws(0.0, 100000, 11));
        CHECK(std::fabs(s.mean - 0.25) <= 0.005);
    }
    SUBCASE("c = 3 matches the series oracle") {
        const Summary s = summarize(draws(3.0, 100000, 12));
        CHECK(std::fabs(s.mean - pg_mean(1, 3.0)) <= 3.0 * s.se);
    }
    SUBCASE("law depends on |c| only") {
        const Summary pos = summarize(draws(2.0, 100000, 13));
        const Summary neg = summarize(draws(-2.0, 100000, 14));
        CHECK(std::fabs(pos.mean - neg.mean) <= 3.0 * std::hypot(pos.se, neg.se));
    }
}

TEST_CASE("sample_pg1 positivity, determinism and bad input") {
    const auto a = draws(1.5, 2000, 99);
    const auto b = draws(1.5, 2000, 99);
    CHECK(a == b);
    for (double x : a) CHECK(x > 0.0);
    for (double x : draws(40.0, 2000, 5)) CHECK(x > 0.0);
    RandomSource rng(1);
    CHECK_THROWS_AS(sample_pg1(NAN, rng), InvalidArgument);
    CHECK_THROWS_AS(sample_pg1(INFINITY, rng), InvalidArgument);
}

TEST_CASE("sample_pg1 symmetry under KS at 1%") {
    const double stat = oracle::ks_statistic(draws(2.5, 100000, 21), draws(-2.5, 100000, 22));
    CHECK(stat < oracle::ks_critical_1pct(100000, 100000));
}

TEST_CASE("sample_pg1 acceptance rate") {
    for (double c : {0.0, 1.0, 4.0, 10.0}) {
        PgCounters counters;
        draws(c, 100000, 31, &counters);
        CAPTURE(c);
        CHECK(counters.acceptances == 100000);
        CHECK(counters.acceptance_rate() >= 0.999);
    }
}

TEST_CASE("sample_pg sums b draws") {
    SUBCASE("b = 1 is the PG(1, c) sampler on the same stream") {
        RandomSource r1(8), r2(8);
        for (int i = 0; i < 100; ++i) CHECK(sample_pg({1, 0.7}, r1) == sample_pg1(0.7, r2));
    }
    SUBCASE("b = 2, c = 0 has mean 1/2") {
        RandomSource rng(9);
        double s = 0.0;
        for (int i = 0; i < 100000; ++i) s += sample_pg({2, 0.0}, rng);
        CHECK(std::fabs(s / 100000 - 0.5) <= 0.01);
    }
    SUBCASE("invalid shape") {
        RandomSource rng(1);
        CHECK_THROWS_AS(sample_pg({0, 1.0}, rng), InvalidArgument);
        CHECK_THROWS_AS(sample_pg({-3, 1.0}, rng), InvalidArgument);
    }
}

TEST_CASE("sample_pg_series reference sampler") {
    SUBCASE("mean at c = 0") {
        RandomSource rng(41);
        double s = 0.0;
        for (int i = 0; i < 10000; ++i) s += sample_pg_series({1, 0.0}, 10000, rng);
        CHECK(std::fabs(s / 10000 - 0.25) <= 0.02 * 0.25);
    }
    SUBCASE("agrees in law with the exact sampler at c = 4") {
        RandomSource rng(42);
        std::vector<double> series(4000);
        for (auto& x : series) x = sample_pg_series({1, 4.0}, 10000, rng);
        const auto exact = draws(4.0, 4000, 43);
        CHECK(oracle::ks_statistic(series, exact) < oracle::ks_critical_1pct(4000, 4000));
    }
    SUBCASE("too few terms") {
        RandomSource rng(1);
        CHECK_THROWS_AS(sample_pg_series({1, 0.0}, 0, rng), InvalidArgument);
        CHECK_THROWS_AS(sample_pg_series({1, 0.0}, 99, rng), InvalidArgument);
    }
}
