#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgts/gauss.hpp"
#include "pgts/polya_gamma.hpp"
#include "pgts/random.hpp"

namespace pgts {

using ContextList = std::span<const Vector>;

/// Numerically stable logistic link.
double sigmoid(double z);

/// Index of the largest score; ties go to the lowest index.
std::size_t argmax_index(std::span<const double> scores);

/// argmax_a sigmoid(x_a' theta), computed on the linear predictor.
std::size_t greedy_arm(ContextList contexts, const Vector& theta);

/// Throws InvalidArgument unless contexts is nonempty and every entry has
/// dimension d.
void check_contexts(ContextList contexts, std::size_t d);

/// Ordered (context, arm, reward) triples observed by a policy.
///
/// Contexts are kept as rows of a growable matrix so the Gibbs sweep can use
/// them without copying. A nonzero window keeps only the most recent rows.
class BanditHistory {
  public:
    explicit BanditHistory(std::size_t d, std::size_t window = 0);

    void append(const Vector& context, std::size_t arm, int reward);

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    std::size_t dim() const { return static_cast<std::size_t>(contexts_.cols()); }
    std::size_t window() const { return window_; }

    auto contexts() const { return contexts_.topRows(static_cast<Eigen::Index>(size_)); }
    /// r_i - 1/2 for each row.
    auto kappa() const { return kappa_.head(static_cast<Eigen::Index>(size_)); }
    int reward(std::size_t i) const { return kappa_[static_cast<Eigen::Index>(i)] > 0.0 ? 1 : 0; }
    std::size_t arm(std::size_t i) const { return arms_[i]; }

    std::uint64_t digest() const;

  private:
    Matrix contexts_;
    Vector kappa_;
    std::vector<std::size_t> arms_;
    std::size_t size_ = 0;
    std::size_t window_ = 0;
};

/// Common select/observe interface shared by every bandit policy.
///
/// select() may advance sampler state (the PG-TS chain position) but never
/// touches the observation history; observe() appends exactly one row.
class Policy {
  public:
    virtual ~Policy() = default;

    virtual std::string_view name() const = 0;
    virtual std::size_t dim() const = 0;

    /// One comparable score per arm; select() is the argmax.
    virtual std::vector<double> scores(ContextList contexts, RandomSource& rng) = 0;
    virtual std::size_t select(ContextList contexts, RandomSource& rng);
    virtual void observe(const Vector& context, std::size_t arm, int reward) = 0;

    virtual std::size_t history_size() const = 0;
    /// Hash of the learned state (history and fitted parameters).
    virtual std::uint64_t state_digest() const = 0;
};

// ---------------------------------------------------------------------------
// PG-TS

/// One Gibbs sweep: omega_i ~ PG(1, x_i' theta_in) for every history row, then
/// theta ~ N(m_omega, V_omega). History must be nonempty.
Vector gibbs_sweep(const BanditHistory& history, const Vector& theta_in, const GaussianPrior& prior,
                   RandomSource& rng, PgCounters* counters = nullptr);

struct PgTsConfig {
    GaussianBelief prior;
    int burn_in = 100;  // M; 1 gives PG-TS-stream
    std::size_t window = 0;

    bool operator==(const PgTsConfig& other) const;
};

class PgTsPolicy final : public Policy {
  public:
    explicit PgTsPolicy(PgTsConfig config);

    std::string_view name() const override { return config_.burn_in == 1 ? "pg-ts-stream" : "pg-ts"; }
    std::size_t dim() const override { return prior_.dim(); }
    std::vector<double> scores(ContextList contexts, RandomSource& rng) override;
    void observe(const Vector& context, std::size_t arm, int reward) override;
    std::size_t history_size() const override { return history_.size(); }
    std::uint64_t state_digest() const override { return history_.digest(); }

    /// Runs the M-sweep chain (or a prior draw when history is empty) and
    /// stores the result as the current theta.
    const Vector& advance(RandomSource& rng);

    const PgTsConfig& config() const { return config_; }
    const BanditHistory& history() const { return history_; }
    const Vector& theta() const { return theta_; }
    const PgCounters& counters() const { return counters_; }

  private:
    PgTsConfig config_;
    GaussianPrior prior_;
    BanditHistory history_;
    Vector theta_;
    bool has_theta_ = false;
    PgCounters counters_;
};

// ---------------------------------------------------------------------------
// Laplace-TS

/// Diagonal Gaussian posterior: mode m and per-coordinate precisions q.
struct LaplaceState {
    Vector m;
    Vector q;

    static LaplaceState initial(std::size_t d, double lambda = 1.0);
    void validate() const;
};

/// Minimizer of 0.5 * sum q_i (w_i - m_i)^2 - log sigmoid(y x'w), y = +-1.
/// Damped Newton, gradient-norm tolerance 1e-8, at most 50 iterations.
Vector laplace_fit_step(const LaplaceState& state, const Vector& x, int y);

/// Posterior update after observing `reward` at context x.
LaplaceState laplace_update(const LaplaceState& state, const Vector& x, int reward);

/// Thompson draw theta ~ N(m, diag(1/q)) followed by greedy selection.
std::size_t laplace_select_arm(const LaplaceState& state, ContextList contexts, RandomSource& rng);

class LaplaceTsPolicy final : public Policy {
  public:
    LaplaceTsPolicy(std::size_t d, double lambda = 1.0);

    std::string_view name() const override { return "laplace-ts"; }
    std::size_t dim() const override { return static_cast<std::size_t>(state_.m.size()); }
    std::vector<double> scores(ContextList contexts, RandomSource& rng) override;
    void observe(const Vector& context, std::size_t arm, int reward) override;
    std::size_t history_size() const override { return observed_; }
    std::uint64_t state_digest() const override;

    const LaplaceState& state() const { return state_; }

  private:
    LaplaceState state_;
    std::size_t observed_ = 0;
};

// ---------------------------------------------------------------------------
// GLM-UCB

/// Ridge-regularized logistic MLE by damped Newton (tolerance 1e-8 on the
/// gradient norm, at most 100 iterations). Empty history gives zero.
Vector glm_mle(const BanditHistory& history, double regularizer, const Vector* warm_start = nullptr);

/// regularizer * I + sum over history of x x'.
Matrix glm_design(const BanditHistory& history, double regularizer);

/// sigmoid(x_a' theta_hat) + alpha * sqrt(log t) * ||x_a||_{design^-1} per arm.
std::vector<double> glmucb_scores(const Vector& theta_hat, const Matrix& design, ContextList contexts, long t,
                                  double alpha);

struct GlmUcbState {
    BanditHistory history;
    double alpha = 1.0;
    double regularizer = 1.0;
};

std::size_t glmucb_select_arm(const GlmUcbState& state, ContextList contexts, long t);

class GlmUcbPolicy final : public Policy {
  public:
    GlmUcbPolicy(std::size_t d, double alpha = 1.0, double regularizer = 1.0);

    std::string_view name() const override { return "glm-ucb"; }
    std::size_t dim() const override { return state_.history.dim(); }
    /// Round t is the number of select/scores calls so far, starting at 1.
    std::vector<double> scores(ContextList contexts, RandomSource& rng) override;
    void observe(const Vector& context, std::size_t arm, int reward) override;
    std::size_t history_size() const override { return state_.history.size(); }
    std::uint64_t state_digest() const override { return state_.history.digest(); }

    const GlmUcbState& state() const { return state_; }

  private:
    GlmUcbState state_;
    Matrix design_;
    Vector theta_hat_;
    bool stale_ = false;
    long round_ = 0;
};

// ---------------------------------------------------------------------------
// Uniform

std::size_t uniform_select_arm(ContextList contexts, RandomSource& rng);

class UniformPolicy final : public Policy {
  public:
    explicit UniformPolicy(std::size_t d) : d_(d) {}

    std::string_view name() const override { return "uniform"; }
    std::size_t dim() const override { return d_; }
    std::vector<double> scores(ContextList contexts, RandomSource& rng) override;
    std::size_t select(ContextList contexts, RandomSource& rng) override;
    void observe(const Vector& context, std::size_t arm, int reward) override;
    std::size_t history_size() const override { return observed_; }
    std::uint64_t state_digest() const override { return observed_; }

  private:
    std::size_t d_;
    std::size_t observed_ = 0;
};

// ---------------------------------------------------------------------------

/// Hyperparameters for building any policy by name.
struct PolicySpec {
    std::string name = "pg-ts";  // pg-ts | pg-ts-stream | laplace-ts | glm-ucb | uniform
    double prior_mean = 0.0;
    double prior_variance = 1.0;
    int burn_in = 100;
    double lambda = 1.0;
    double alpha = 1.0;
    double regularizer = 1.0;
    std::size_t window = 0;

    void validate() const;
};

bool is_known_policy(std::string_view name);

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, std::size_t d);

}  // namespace pgts
