#include "pgts/polya_gamma.hpp"

#include <cmath>
#include <numbers>

#include "pgts/errors.hpp"

namespace pgts {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;

// log of the standard normal CDF; asymptotic expansion deep in the left tail.
double log_normal_cdf(double x) {
    if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    const double x2 = x * x;
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// n-th coefficient of the alternating series for the J*(1, 0) density,
// using the small-x or large-x representation depending on x.
double series_coef(int n, double x) {
    const double k = (n + 0.5) * kPi;
    if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
    if (x <= 0.0) return 0.0;
    const double h = n + 0.5;
    return std::exp(-1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) - 2.0 * h * h / x);
}

// Probability of choosing the exponential branch of the proposal.
double exponential_branch_mass(double z) {
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double root = std::sqrt(1.0 / kTrunc);
    const double upper = root * (kTrunc * z - 1.0);
    const double lower = -root * (kTrunc * z + 1.0);
    const double x0 = std::log(fz) + fz * kTrunc;
    const double xb = x0 - z + log_normal_cdf(upper);
    const double xa = x0 + z + log_normal_cdf(lower);
    const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
    return 1.0 / (1.0 + q_over_p);
}

// Inverse-Gaussian(1/z, 1) truncated to (0, kTrunc].
double truncated_inverse_gaussian(double z, RandomSource& rng) {
    double x = kTrunc + 1.0;
    if (z < 1.0 / kTrunc) {
        // mean exceeds the truncation point: chi-square based proposal
        double alpha = 0.0;
        while (rng.uniform() > alpha) {
            double e1 = rng.exponential();
            double e2 = rng.exponential();
            while (e1 * e1 > 2.0 * e2 / kTrunc) {
                e1 = rng.exponential();
                e2 = rng.exponential();
            }
            x = 1.0 + e1 * kTrunc;
            x = kTrunc / (x * x);
            alpha = std::exp(-0.5 * z * z * x);
        }
        return x;
    }
    const double mu = 1.0 / z;
    while (x > kTrunc) {
        double y = rng.normal();
        y *= y;
        const double mu_y = mu * y;
        x = mu + 0.5 * mu * mu_y - 0.5 * mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
        if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
    return x;
}

}  // namespace

void PolyaGammaParams::validate() const {
    if (b < 1) throw InvalidArgument("PolyaGamma: shape b must be >= 1");
    if (!std::isfinite(c)) throw InvalidArgument("PolyaGamma: tilt c must be finite");
}

double sample_pg1(double c, RandomSource& rng, PgCounters* counters) {
    if (!std::isfinite(c)) throw InvalidArgument("sample_pg1: c must be finite");
    // PG(1, c) = J*(1, |c|/2) / 4
    const double z = 0.5 * std::fabs(c);
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double exp_mass = exponential_branch_mass(z);

    for (int proposal = 0; proposal < kPgProposalCap; ++proposal) {
        if (counters) ++counters->proposals;
        const double x = rng.uniform() < exp_mass ? kTrunc + rng.exponential() / fz
                                                  : truncated_inverse_gaussian(z, rng);
        double s = series_coef(0, x);
        const double y = rng.uniform() * s;
        for (int n = 1;; ++n) {
            if (n % 2 == 1) {
                s -= series_coef(n, x);
                if (y <= s) {
                    if (counters) ++counters->acceptances;
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if (y > s) break;
            }
        }
    }
    throw SamplerFault("sample_pg1: proposal cap exceeded");
}

double sample_pg(const PolyaGammaParams& params, RandomSource& rng, PgCounters* counters) {
    params.validate();
    double sum = 0.0;
    for (int i = 0; i < params.b; ++i) sum += sample_pg1(params.c, rng, counters);
    return sum;
}

double pg_mean(int b, double c, long terms) {
    if (b < 1) throw InvalidArgument("pg_mean: b must be >= 1");
    if (terms < 1) throw InvalidArgument("pg_mean: terms must be >= 1");
    const double tilt = c * c / (4.0 * kPi * kPi);
    double sum = 0.0;
    // smallest terms first
    for (long k = terms; k >= 1; --k) {
        const double h = static_cast<double>(k) - 0.5;
        sum += 1.0 / (h * h + tilt);
    }
    return static_cast<double>(b) / (2.0 * kPi * kPi) * sum;
}

double sample_pg_series(const PolyaGammaParams& params, long terms, RandomSource& rng) {
    params.validate();
    if (terms < 100) throw InvalidArgument("sample_pg_series: terms must be >= 100");
    const double tilt = params.c * params.c / (4.0 * kPi * kPi);
    std::gamma_distribution<double> gamma(static_cast<double>(params.b), 1.0);
    double sum = 0.0;
    for (long k = 1; k <= terms; ++k) {
        const double h = static_cast<double>(k) - 0.5;
        sum += gamma(rng.engine()) / (h * h + tilt);
    }
    return sum / (2.0 * kPi * kPi);
}

}  // namespace pgts
