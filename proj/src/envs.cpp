#include "pgts/envs.hpp"

#include <cmath>
#include <numeric>

#include "pgts/errors.hpp"
#include "pgts/policies.hpp"

namespace pgts {
namespace {

Vector normal_vector(std::size_t d, double mean, RandomSource& rng) {
    Vector v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = mean + rng.normal();
    return v;
}

}  // namespace

Environment::Environment(std::vector<Vector> arm_contexts, std::vector<double> arm_means, Vector theta_star)
    : contexts_(std::move(arm_contexts)), means_(std::move(arm_means)), theta_star_(std::move(theta_star)) {
    if (contexts_.empty()) throw InvalidArgument("Environment: no arms");
    if (contexts_.size() != means_.size()) throw InvalidArgument("Environment: context and rate counts differ");
    const auto d = contexts_.front().size();
    if (d == 0) throw InvalidArgument("Environment: empty contexts");
    for (const auto& x : contexts_)
        if (x.size() != d) throw InvalidArgument("Environment: context dimensions differ");
    for (double m : means_)
        if (!(m >= 0.0 && m <= 1.0)) throw InvalidArgument("Environment: expected rewards must lie in [0, 1]");
    optimal_ = argmax_index(means_);
}

double Environment::average_mean() const {
    return std::accumulate(means_.begin(), means_.end(), 0.0) / static_cast<double>(means_.size());
}

void Environment::check_arm(std::size_t arm) const {
    if (arm >= contexts_.size()) throw InvalidArgument("Environment: arm index out of range");
}

int Environment::step(std::size_t arm, RandomSource& rng) const {
    check_arm(arm);
    return rng.uniform() < means_[arm] ? 1 : 0;
}

double Environment::instant_regret(std::size_t arm) const {
    check_arm(arm);
    return means_[optimal_] - means_[arm];
}

Environment make_sim_env(std::vector<Vector> arm_contexts, Vector theta_star) {
    std::vector<double> means;
    means.reserve(arm_contexts.size());
    for (const auto& x : arm_contexts) {
        if (x.size() != theta_star.size()) throw InvalidArgument("make_sim_env: dimension mismatch");
        means.push_back(sigmoid(x.dot(theta_star)));
    }
    return Environment(std::move(arm_contexts), std::move(means), std::move(theta_star));
}

Environment make_gaussian_env(std::size_t arms, std::size_t d, double context_mean, std::uint64_t seed) {
    if (arms < 2) throw InvalidArgument("make_gaussian_env: need at least 2 arms");
    if (d < 1) throw InvalidArgument("make_gaussian_env: need d >= 1");
    RandomSource rng(seed);
    std::vector<Vector> contexts;
    contexts.reserve(arms);
    for (std::size_t a = 0; a < arms; ++a) contexts.push_back(normal_vector(d, context_mean, rng));
    Vector theta = normal_vector(d, 0.0, rng);
    return make_sim_env(std::move(contexts), std::move(theta));
}

MixtureTheta make_mixture_theta(std::size_t d, std::uint64_t seed) {
    if (d < 1) throw InvalidArgument("make_mixture_theta: need d >= 1");
    RandomSource rng(seed);
    constexpr double kConcentration[4] = {1.0, 3.0, 5.0, 7.0};
    MixtureTheta out;
    for (int j = 0; j < 4; ++j) {
        const double variance = 1.0 / rng.gamma(3.0);  // InvGamma(3, 1)
        out.variances.push_back(variance);
        out.means.push_back(-3.0 + std::sqrt(variance) * rng.normal());
    }
    double total = 0.0;
    for (double a : kConcentration) {
        out.weights.push_back(rng.gamma(a));
        total += out.weights.back();
    }
    for (auto& w : out.weights) w /= total;

    out.theta.resize(static_cast<Eigen::Index>(d));
    for (auto& value : out.theta) {
        const double u = rng.uniform();
        std::size_t j = 0;
        for (double acc = out.weights[0]; j < 3 && u > acc; acc += out.weights[++j]) {}
        value = out.means[j] + std::sqrt(out.variances[j]) * rng.normal();
    }
    return out;
}

Environment make_mixture_env(std::size_t arms, std::size_t d, std::uint64_t seed) {
    if (arms < 2) throw InvalidArgument("make_mixture_env: need at least 2 arms");
    Vector theta = make_mixture_theta(d, derive_seed(seed, 1)).theta;
    RandomSource rng(derive_seed(seed, 2));
    std::vector<Vector> contexts;
    contexts.reserve(arms);
    for (std::size_t a = 0; a < arms; ++a) contexts.push_back(normal_vector(d, 0.0, rng));
    return make_sim_env(std::move(contexts), std::move(theta));
}

Environment make_cluster_env(std::vector<Vector> centroids, std::vector<double> rates) {
    if (centroids.size() != rates.size()) throw InvalidArgument("make_cluster_env: centroid and rate counts differ");
    return Environment(std::move(centroids), std::move(rates));
}

void RegretTrace::record(std::size_t arm, int reward, double regret) {
    if (!(regret >= 0.0)) throw InvalidArgument("RegretTrace: regret must be non-negative");
    arms.push_back(arm);
    rewards.push_back(reward);
    instant.push_back(regret);
    cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + regret);
}

}  // namespace pgts
