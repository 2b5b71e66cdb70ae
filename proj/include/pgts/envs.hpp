#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pgts/gauss.hpp"
#include "pgts/random.hpp"

namespace pgts {

/// A K-armed environment with fixed per-arm contexts and Bernoulli rewards.
///
/// Regret is measured against the arm with the highest expected reward. For
/// simulated environments the expected rewards are sigmoid(x_a' theta*); for
/// cluster environments they are the empirical cluster rates.
class Environment {
  public:
    Environment(std::vector<Vector> arm_contexts, std::vector<double> arm_means, Vector theta_star = {});

    std::size_t arms() const { return contexts_.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(contexts_.front().size()); }
    const std::vector<Vector>& contexts() const { return contexts_; }
    const std::vector<double>& arm_means() const { return means_; }
    /// Empty for cluster environments.
    const Vector& theta_star() const { return theta_star_; }
    std::size_t optimal_arm() const { return optimal_; }
    double optimal_mean() const { return means_[optimal_]; }
    double average_mean() const;

    /// Bernoulli(arm_means[arm]) draw.
    int step(std::size_t arm, RandomSource& rng) const;
    /// arm_means[optimal] - arm_means[arm].
    double instant_regret(std::size_t arm) const;

  private:
    void check_arm(std::size_t arm) const;

    std::vector<Vector> contexts_;
    std::vector<double> means_;
    Vector theta_star_;
    std::size_t optimal_ = 0;
};

/// Simulated environment with means sigmoid(x_a' theta*).
Environment make_sim_env(std::vector<Vector> arm_contexts, Vector theta_star);

/// Contexts x_a ~ N(context_mean * 1, I_d), drawn once; theta* ~ N(0, I_d).
Environment make_gaussian_env(std::size_t arms, std::size_t d, double context_mean, std::uint64_t seed);

/// Mixture draw of theta*: sigma_j^2 ~ InvGamma(3, 1), mu_j ~ N(-3, sigma_j^2),
/// phi ~ Dirichlet(1, 3, 5, 7); each coordinate i.i.d. from the 4-component
/// mixture.
struct MixtureTheta {
    Vector theta;
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;
};
MixtureTheta make_mixture_theta(std::size_t d, std::uint64_t seed);

/// Contexts x_a ~ N(0, I_d), theta* from make_mixture_theta.
Environment make_mixture_env(std::size_t arms, std::size_t d, std::uint64_t seed);

/// Environment from cluster centroids and per-cluster positive rates.
Environment make_cluster_env(std::vector<Vector> centroids, std::vector<double> rates);

/// Per-round record of a bandit run with its regret accounting.
struct RegretTrace {
    std::vector<std::size_t> arms;
    std::vector<int> rewards;
    std::vector<double> instant;
    std::vector<double> cumulative;

    void record(std::size_t arm, int reward, double regret);
    std::size_t size() const { return arms.size(); }
};

}  // namespace pgts
