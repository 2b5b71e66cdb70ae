#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "pgts/random.hpp"

namespace pgts {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Mean and covariance of a multivariate normal over the coefficient vector.
struct GaussianBelief {
    Vector mean;
    Matrix covariance;

    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
    /// Throws InvalidArgument on shape mismatch or asymmetric covariance.
    void validate() const;

    static GaussianBelief isotropic(std::size_t d, double mean = 0.0, double variance = 1.0);
};

/// Rows of chosen contexts with their centered rewards (r - 1/2) and
/// Polya-Gamma weights.
struct DesignBundle {
    Matrix X;
    Vector kappa;
    Vector omega;

    void validate() const;
};

/// Prior together with its cached precision B^-1 and precision-weighted mean
/// B^-1 b, both obtained from Cholesky solves.
class GaussianPrior {
  public:
    explicit GaussianPrior(GaussianBelief belief);

    const GaussianBelief& belief() const { return belief_; }
    const Matrix& precision() const { return precision_; }
    const Vector& precision_mean() const { return precision_mean_; }
    const Matrix& covariance_factor() const { return covariance_factor_; }
    std::size_t dim() const { return belief_.dim(); }

  private:
    GaussianBelief belief_;
    Matrix covariance_factor_;
    Matrix precision_;
    Vector precision_mean_;
};

/// Gaussian in precision form: mean and the lower Cholesky factor of the
/// precision matrix.
struct PrecisionGaussian {
    Vector mean;
    Matrix precision_factor;
};

/// Symmetry tolerance (relative to the largest entry) accepted by cholesky().
inline constexpr double kSymmetryTolerance = 1e-10;

/// Lower Cholesky factor of a symmetric positive-definite matrix. On failure
/// retries with diagonal jitter 1e-10 * trace/d, escalating 10x up to three
/// times, then throws FactorizationError.
Matrix cholesky(const Matrix& a);

/// mean + L z with L = cholesky(covariance) and z standard normal.
Vector sample_mvn(const GaussianBelief& belief, RandomSource& rng);

/// Draws from a precision-form Gaussian: mean + L^-T z.
Vector sample_mvn(const PrecisionGaussian& gaussian, RandomSource& rng);

/// Conditional posterior of theta given Polya-Gamma weights, in precision
/// form. `rows` is the first rows of X to use.
PrecisionGaussian pg_conditional_precision(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& kappa,
                                           const Eigen::Ref<const Vector>& omega, const GaussianPrior& prior);

/// V = (X' Omega X + B^-1)^-1 and m = V (X' kappa + B^-1 b), via Cholesky solves.
GaussianBelief pg_conditional_posterior(const DesignBundle& bundle, const GaussianPrior& prior);
GaussianBelief pg_conditional_posterior(const DesignBundle& bundle, const GaussianBelief& prior);

}  // namespace pgts
