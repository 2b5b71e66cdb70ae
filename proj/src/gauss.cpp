#include "pgts/gauss.hpp"

#include <cmath>
#include <string>

#include "pgts/errors.hpp"

namespace pgts {
namespace {

void require_symmetric(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) throw InvalidArgument(std::string(what) + ": matrix is not square");
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTolerance * std::max(scale, 1e-300))
        throw InvalidArgument(std::string(what) + ": matrix is not symmetric");
}

Vector standard_normal(Eigen::Index d, RandomSource& rng) {
    Vector z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
    return z;
}

// Cholesky with the jitter ladder; input assumed symmetric.
Matrix factor_spd(const Matrix& a) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const auto d = a.rows();
    const double trace = a.trace();
    if (d > 0 && trace > 0.0) {
        double jitter = 1e-10 * trace / static_cast<double>(d);
        for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10.0) {
            Matrix shifted = a;
            shifted.diagonal().array() += jitter;
            llt.compute(shifted);
            if (llt.info() == Eigen::Success) return llt.matrixL();
        }
    }
    throw FactorizationError("cholesky: matrix is not positive definite");
}

}  // namespace

void GaussianBelief::validate() const {
    if (mean.size() == 0) throw InvalidArgument("GaussianBelief: empty mean");
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
        throw InvalidArgument("GaussianBelief: covariance shape does not match mean");
    require_symmetric(covariance, "GaussianBelief");
}

GaussianBelief GaussianBelief::isotropic(std::size_t d, double mean, double variance) {
    const auto n = static_cast<Eigen::Index>(d);
    return {Vector::Constant(n, mean), Matrix::Identity(n, n) * variance};
}

void DesignBundle::validate() const {
    if (kappa.size() != X.rows() || omega.size() != X.rows())
        throw InvalidArgument("DesignBundle: X, kappa and omega row counts differ");
    for (Eigen::Index i = 0; i < kappa.size(); ++i) {
        if (std::fabs(std::fabs(kappa[i]) - 0.5) > 0.0) throw InvalidArgument("DesignBundle: kappa must be +-1/2");
        if (!(omega[i] > 0.0)) throw InvalidArgument("DesignBundle: omega must be positive");
    }
}

GaussianPrior::GaussianPrior(GaussianBelief belief) : belief_(std::move(belief)) {
    belief_.validate();
    covariance_factor_ = cholesky(belief_.covariance);
    const auto d = belief_.mean.size();
    const auto lower = covariance_factor_.triangularView<Eigen::Lower>();
    // B^-1 = L^-T L^-1
    const Matrix l_inv = lower.solve(Matrix::Identity(d, d));
    precision_ = l_inv.transpose() * l_inv;
    precision_mean_ = covariance_factor_.transpose().triangularView<Eigen::Upper>().solve(lower.solve(belief_.mean));
}

Matrix cholesky(const Matrix& a) {
    require_symmetric(a, "cholesky");
    return factor_spd(a);
}

Vector sample_mvn(const GaussianBelief& belief, RandomSource& rng) {
    belief.validate();
    const Matrix l = cholesky(belief.covariance);
    return belief.mean + l.triangularView<Eigen::Lower>() * standard_normal(belief.mean.size(), rng);
}

Vector sample_mvn(const PrecisionGaussian& gaussian, RandomSource& rng) {
    const Vector z = standard_normal(gaussian.mean.size(), rng);
    return gaussian.mean + gaussian.precision_factor.transpose().triangularView<Eigen::Upper>().solve(z);
}

PrecisionGaussian pg_conditional_precision(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& kappa,
                                           const Eigen::Ref<const Vector>& omega, const GaussianPrior& prior) {
    const auto d = static_cast<Eigen::Index>(prior.dim());
    if (X.cols() != d && X.rows() > 0) throw InvalidArgument("pg_conditional_posterior: context dimension mismatch");
    Matrix precision = prior.precision();
    Vector rhs = prior.precision_mean();
    if (X.rows() > 0) {
        const Matrix weighted = omega.cwiseSqrt().asDiagonal() * X;
        precision.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
        precision.triangularView<Eigen::StrictlyUpper>() = precision.transpose();
        rhs.noalias() += X.transpose() * kappa;
    }
    PrecisionGaussian out;
    out.precision_factor = factor_spd(precision);
    const auto lower = out.precision_factor.triangularView<Eigen::Lower>();
    out.mean = out.precision_factor.transpose().triangularView<Eigen::Upper>().solve(lower.solve(rhs));
    return out;
}

GaussianBelief pg_conditional_posterior(const DesignBundle& bundle, const GaussianPrior& prior) {
    bundle.validate();
    const PrecisionGaussian post = pg_conditional_precision(bundle.X, bundle.kappa, bundle.omega, prior);
    const auto d = post.mean.size();
    const Matrix l_inv = post.precision_factor.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
    return {post.mean, l_inv.transpose() * l_inv};
}

GaussianBelief pg_conditional_posterior(const DesignBundle& bundle, const GaussianBelief& prior) {
    return pg_conditional_posterior(bundle, GaussianPrior(prior));
}

}  // namespace pgts
