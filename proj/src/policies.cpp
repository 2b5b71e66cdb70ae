#include "pgts/policies.hpp"

#include <algorithm>
#include <cmath>

#include "pgts/errors.hpp"

namespace pgts {
namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::uint64_t hash_vector(const Vector& v, std::uint64_t state) {
    return fnv1a(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), state);
}

// Armijo backtracking. Near the optimum the decrease drops below the
// objective's rounding error, so a tiny Newton decrement takes the full step.
template <class Objective>
double backtrack(const Objective& f, const Vector& w, const Vector& step, double f0, double slope) {
    if (-slope <= 1e-12 * (1.0 + std::fabs(f0))) return 1.0;
    double t = 1.0;
    for (int i = 0; i < 60; ++i, t *= 0.5) {
        if (f(w + t * step) <= f0 + 1e-4 * t * slope) return t;
    }
    return t;
}

}  // namespace

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::size_t argmax_index(std::span<const double> scores) {
    if (scores.empty()) throw InvalidArgument("argmax_index: no scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

void check_contexts(ContextList contexts, std::size_t d) {
    if (contexts.empty()) throw InvalidArgument("no arms to choose from");
    for (const auto& x : contexts)
        if (static_cast<std::size_t>(x.size()) != d) throw InvalidArgument("context dimension mismatch");
}

std::size_t greedy_arm(ContextList contexts, const Vector& theta) {
    check_contexts(contexts, static_cast<std::size_t>(theta.size()));
    std::vector<double> logits(contexts.size());
    for (std::size_t a = 0; a < contexts.size(); ++a) logits[a] = contexts[a].dot(theta);
    return argmax_index(logits);
}

// ---------------------------------------------------------------------------

BanditHistory::BanditHistory(std::size_t d, std::size_t window)
    : contexts_(0, static_cast<Eigen::Index>(d)), window_(window) {
    if (d == 0) throw InvalidArgument("BanditHistory: dimension must be >= 1");
}

void BanditHistory::append(const Vector& context, std::size_t arm, int reward) {
    if (context.size() != contexts_.cols()) throw InvalidArgument("BanditHistory: context dimension mismatch");
    if (reward != 0 && reward != 1) throw InvalidArgument("BanditHistory: reward must be 0 or 1");
    if (window_ > 0 && size_ == window_) {
        const auto keep = static_cast<Eigen::Index>(size_ - 1);
        contexts_.topRows(keep) = contexts_.middleRows(1, keep).eval();
        kappa_.head(keep) = kappa_.segment(1, keep).eval();
        arms_.erase(arms_.begin());
        --size_;
    }
    const auto row = static_cast<Eigen::Index>(size_);
    if (row == contexts_.rows()) {
        const Eigen::Index capacity = std::max<Eigen::Index>(16, 2 * contexts_.rows());
        contexts_.conservativeResize(capacity, Eigen::NoChange);
        kappa_.conservativeResize(capacity);
    }
    contexts_.row(row) = context.transpose();
    kappa_[row] = reward - 0.5;
    arms_.push_back(arm);
    ++size_;
}

std::uint64_t BanditHistory::digest() const {
    std::uint64_t h = fnv1a(&size_, sizeof(size_));
    for (std::size_t i = 0; i < size_; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const Vector row = contexts_.row(r).transpose();
        h = hash_vector(row, h);
        h = fnv1a(&kappa_[r], sizeof(double), h);
        h = fnv1a(&arms_[i], sizeof(std::size_t), h);
    }
    return h;
}

std::size_t Policy::select(ContextList contexts, RandomSource& rng) {
    const std::vector<double> s = scores(contexts, rng);
    return argmax_index(s);
}

// ---------------------------------------------------------------------------
// PG-TS

Vector gibbs_sweep(const BanditHistory& history, const Vector& theta_in, const GaussianPrior& prior,
                   RandomSource& rng, PgCounters* counters) {
    if (history.empty()) throw InvalidArgument("gibbs_sweep: empty history");
    if (static_cast<std::size_t>(theta_in.size()) != history.dim() || history.dim() != prior.dim())
        throw InvalidArgument("gibbs_sweep: dimension mismatch");
    const auto X = history.contexts();
    const Vector linear = X * theta_in;
    Vector omega(linear.size());
    for (Eigen::Index i = 0; i < linear.size(); ++i) omega[i] = sample_pg1(linear[i], rng, counters);
    return sample_mvn(pg_conditional_precision(X, history.kappa(), omega, prior), rng);
}

bool PgTsConfig::operator==(const PgTsConfig& other) const {
    return burn_in == other.burn_in && window == other.window && prior.mean == other.prior.mean &&
           prior.covariance == other.prior.covariance;
}

PgTsPolicy::PgTsPolicy(PgTsConfig config)
    : config_(std::move(config)), prior_(config_.prior), history_(config_.prior.dim(), config_.window) {
    if (config_.burn_in < 1) throw InvalidArgument("PgTsPolicy: burn-in M must be >= 1");
}

const Vector& PgTsPolicy::advance(RandomSource& rng) {
    if (history_.empty()) {
        theta_ = prior_.belief().mean +
                 prior_.covariance_factor().triangularView<Eigen::Lower>() * [&] {
                     Vector z(static_cast<Eigen::Index>(prior_.dim()));
                     for (auto& v : z) v = rng.normal();
                     return z;
                 }();
    } else {
        if (!has_theta_) theta_ = prior_.belief().mean;
        for (int m = 0; m < config_.burn_in; ++m) theta_ = gibbs_sweep(history_, theta_, prior_, rng, &counters_);
    }
    has_theta_ = true;
    return theta_;
}

std::vector<double> PgTsPolicy::scores(ContextList contexts, RandomSource& rng) {
    check_contexts(contexts, dim());
    const Vector& theta = advance(rng);
    std::vector<double> out(contexts.size());
    for (std::size_t a = 0; a < contexts.size(); ++a) out[a] = contexts[a].dot(theta);
    return out;
}

void PgTsPolicy::observe(const Vector& context, std::size_t arm, int reward) { history_.append(context, arm, reward); }

// ---------------------------------------------------------------------------
// Laplace-TS

LaplaceState LaplaceState::initial(std::size_t d, double lambda) {
    if (d == 0) throw InvalidArgument("LaplaceState: dimension must be >= 1");
    if (!(lambda > 0.0)) throw InvalidArgument("LaplaceState: lambda must be positive");
    const auto n = static_cast<Eigen::Index>(d);
    return {Vector::Zero(n), Vector::Constant(n, lambda)};
}

void LaplaceState::validate() const {
    if (m.size() != q.size() || m.size() == 0) throw InvalidArgument("LaplaceState: shape mismatch");
    if (!(q.array() > 0.0).all()) throw InvalidArgument("LaplaceState: precisions must be positive");
}

Vector laplace_fit_step(const LaplaceState& state, const Vector& x, int y) {
    state.validate();
    if (x.size() != state.m.size()) throw InvalidArgument("laplace_fit_step: dimension mismatch");
    if (y != 1 && y != -1) throw InvalidArgument("laplace_fit_step: y must be +-1");
    const auto objective = [&](const Vector& w) {
        return 0.5 * (state.q.array() * (w - state.m).array().square()).sum() + softplus(-y * x.dot(w));
    };
    Vector w = state.m;
    for (int iter = 0; iter <= 50; ++iter) {
        const double margin = y * x.dot(w);
        const double tail = sigmoid(-margin);
        const Vector grad = (state.q.array() * (w - state.m).array()).matrix() - (y * tail) * x;
        if (grad.norm() <= 1e-8) return w;
        if (iter == 50) break;
        const double curvature = tail * (1.0 - tail);
        Matrix hessian = state.q.asDiagonal();
        hessian.noalias() += curvature * x * x.transpose();
        const Vector step = -hessian.llt().solve(grad);
        w += backtrack(objective, w, step, objective(w), grad.dot(step)) * step;
    }
    throw NumericalFailure("laplace_fit_step: Newton did not converge in 50 iterations");
}

LaplaceState laplace_update(const LaplaceState& state, const Vector& x, int reward) {
    if (reward != 0 && reward != 1) throw InvalidArgument("laplace_update: reward must be 0 or 1");
    LaplaceState next{laplace_fit_step(state, x, 2 * reward - 1), state.q};
    const double p = sigmoid(x.dot(next.m));
    next.q.array() += p * (1.0 - p) * x.array().square();
    return next;
}

namespace {

Vector laplace_draw(const LaplaceState& state, RandomSource& rng) {
    Vector theta(state.m.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = state.m[i] + rng.normal() / std::sqrt(state.q[i]);
    return theta;
}

}  // namespace

std::size_t laplace_select_arm(const LaplaceState& state, ContextList contexts, RandomSource& rng) {
    state.validate();
    check_contexts(contexts, static_cast<std::size_t>(state.m.size()));
    return greedy_arm(contexts, laplace_draw(state, rng));
}

LaplaceTsPolicy::LaplaceTsPolicy(std::size_t d, double lambda) : state_(LaplaceState::initial(d, lambda)) {}

std::vector<double> LaplaceTsPolicy::scores(ContextList contexts, RandomSource& rng) {
    check_contexts(contexts, dim());
    const Vector theta = laplace_draw(state_, rng);
    std::vector<double> out(contexts.size());
    for (std::size_t a = 0; a < contexts.size(); ++a) out[a] = contexts[a].dot(theta);
    return out;
}

void LaplaceTsPolicy::observe(const Vector& context, std::size_t /*arm*/, int reward) {
    state_ = laplace_update(state_, context, reward);
    ++observed_;
}

std::uint64_t LaplaceTsPolicy::state_digest() const {
    std::uint64_t h = fnv1a(&observed_, sizeof(observed_));
    h = hash_vector(state_.m, h);
    return hash_vector(state_.q, h);
}

// ---------------------------------------------------------------------------
// GLM-UCB

Vector glm_mle(const BanditHistory& history, double regularizer, const Vector* warm_start) {
    if (!(regularizer > 0.0)) throw InvalidArgument("glm_mle: regularizer must be positive");
    const auto d = static_cast<Eigen::Index>(history.dim());
    Vector theta = warm_start && warm_start->size() == d ? *warm_start : Vector::Zero(d);
    if (history.empty()) return Vector::Zero(d);
    const auto X = history.contexts();
    const Vector rewards = (history.kappa().array() + 0.5).matrix();
    const auto objective = [&](const Vector& th) {
        const Vector eta = X * th;
        double nll = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) nll += softplus(eta[i]) - rewards[i] * eta[i];
        return 0.5 * regularizer * th.squaredNorm() + nll;
    };
    for (int iter = 0; iter <= 100; ++iter) {
        const Vector eta = X * theta;
        Vector mu(eta.size());
        Vector weight(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu[i] = sigmoid(eta[i]);
            weight[i] = mu[i] * (1.0 - mu[i]);
        }
        const Vector grad = regularizer * theta - X.transpose() * (rewards - mu);
        if (grad.norm() <= 1e-8) return theta;
        if (iter == 100) break;
        Matrix hessian = Matrix::Identity(d, d) * regularizer;
        hessian.noalias() += X.transpose() * weight.asDiagonal() * X;
        const Vector step = -hessian.llt().solve(grad);
        theta += backtrack(objective, theta, step, objective(theta), grad.dot(step)) * step;
    }
    throw NumericalFailure("glm_mle: Newton did not converge in 100 iterations");
}

Matrix glm_design(const BanditHistory& history, double regularizer) {
    const auto d = static_cast<Eigen::Index>(history.dim());
    Matrix design = Matrix::Identity(d, d) * regularizer;
    const auto X = history.contexts();
    design.noalias() += X.transpose() * X;
    return design;
}

std::vector<double> glmucb_scores(const Vector& theta_hat, const Matrix& design, ContextList contexts, long t,
                                  double alpha) {
    if (t < 1) throw InvalidArgument("glmucb: round t must be >= 1");
    check_contexts(contexts, static_cast<std::size_t>(theta_hat.size()));
    const Eigen::LLT<Matrix> llt(design);
    if (llt.info() != Eigen::Success) throw FactorizationError("glmucb: design matrix is not positive definite");
    const double width = alpha * std::sqrt(std::log(static_cast<double>(t)));
    std::vector<double> out(contexts.size());
    for (std::size_t a = 0; a < contexts.size(); ++a) {
        const Vector half = llt.matrixL().solve(contexts[a]);
        out[a] = sigmoid(contexts[a].dot(theta_hat)) + width * half.norm();
    }
    return out;
}

std::size_t glmucb_select_arm(const GlmUcbState& state, ContextList contexts, long t) {
    if (!(state.alpha >= 0.0) || !(state.regularizer > 0.0)) throw InvalidArgument("glmucb: bad hyperparameters");
    const Vector theta_hat = glm_mle(state.history, state.regularizer);
    const std::vector<double> s =
        glmucb_scores(theta_hat, glm_design(state.history, state.regularizer), contexts, t, state.alpha);
    return argmax_index(s);
}

GlmUcbPolicy::GlmUcbPolicy(std::size_t d, double alpha, double regularizer)
    : state_{BanditHistory(d), alpha, regularizer},
      design_(Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) * regularizer),
      theta_hat_(Vector::Zero(static_cast<Eigen::Index>(d))) {
    if (!(alpha > 0.0)) throw InvalidArgument("GlmUcbPolicy: alpha must be positive");
    if (!(regularizer > 0.0)) throw InvalidArgument("GlmUcbPolicy: regularizer must be positive");
}

std::vector<double> GlmUcbPolicy::scores(ContextList contexts, RandomSource& /*rng*/) {
    check_contexts(contexts, dim());
    if (stale_) {
        theta_hat_ = glm_mle(state_.history, state_.regularizer, &theta_hat_);
        stale_ = false;
    }
    return glmucb_scores(theta_hat_, design_, contexts, ++round_, state_.alpha);
}

void GlmUcbPolicy::observe(const Vector& context, std::size_t arm, int reward) {
    state_.history.append(context, arm, reward);
    design_.noalias() += context * context.transpose();
    stale_ = true;
}

// ---------------------------------------------------------------------------
// Uniform

std::size_t uniform_select_arm(ContextList contexts, RandomSource& rng) {
    if (contexts.empty()) throw InvalidArgument("uniform_select_arm: no arms");
    return rng.index(contexts.size());
}

std::vector<double> UniformPolicy::scores(ContextList contexts, RandomSource& rng) {
    check_contexts(contexts, d_);
    std::vector<double> out(contexts.size());
    for (auto& s : out) s = rng.uniform();
    return out;
}

std::size_t UniformPolicy::select(ContextList contexts, RandomSource& rng) {
    check_contexts(contexts, d_);
    return uniform_select_arm(contexts, rng);
}

void UniformPolicy::observe(const Vector& context, std::size_t /*arm*/, int reward) {
    if (static_cast<std::size_t>(context.size()) != d_) throw InvalidArgument("UniformPolicy: dimension mismatch");
    if (reward != 0 && reward != 1) throw InvalidArgument("UniformPolicy: reward must be 0 or 1");
    ++observed_;
}

// ---------------------------------------------------------------------------

bool is_known_policy(std::string_view name) {
    return name == "pg-ts" || name == "pg-ts-stream" || name == "laplace-ts" || name == "glm-ucb" ||
           name == "uniform";
}

void PolicySpec::validate() const {
    if (!is_known_policy(name)) throw InvalidArgument("unknown policy '" + name + "'");
    if (!(prior_variance > 0.0)) throw InvalidArgument("prior variance must be positive");
    if (burn_in < 1) throw InvalidArgument("burn-in must be >= 1");
    if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
    if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
    if (!(regularizer > 0.0)) throw InvalidArgument("regularizer must be positive");
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, std::size_t d) {
    spec.validate();
    if (spec.name == "pg-ts" || spec.name == "pg-ts-stream") {
        PgTsConfig config{GaussianBelief::isotropic(d, spec.prior_mean, spec.prior_variance),
                          spec.name == "pg-ts-stream" ? 1 : spec.burn_in, spec.window};
        return std::make_unique<PgTsPolicy>(std::move(config));
    }
    if (spec.name == "laplace-ts") return std::make_unique<LaplaceTsPolicy>(d, spec.lambda);
    if (spec.name == "glm-ucb") return std::make_unique<GlmUcbPolicy>(d, spec.alpha, spec.regularizer);
    return std::make_unique<UniformPolicy>(d);
}

}  // namespace pgts
