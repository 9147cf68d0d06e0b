#pragma once

// Confidence ellipsoids for the ridge estimate and the scalar deviation bound
// on sums of martingale differences.
//
// The ellipsoid is {theta : ||theta - center||_V <= radius}, where V is the
// regularized design matrix. Linear functionals over it have the closed form
//     min <theta, x> = <center, x> - radius * ||x||_{V^{-1}}
//     max <theta, x> = <center, x> + radius * ||x||_{V^{-1}}
// so both V and V^{-1} are carried.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "cbandit/errors.hpp"
#include "cbandit/rls.hpp"

namespace cbandit {

inline constexpr double kMembershipSlack = 1e-12;

struct BoundParams {
    double sigma = 1.0;   // subgaussian noise scale
    double b_norm = 1.0;  // bound on ||theta*||
    double d_norm = 1.0;  // bound on ||phi||
    double lambda = 1.0;
    double delta = 0.01;
    Eigen::Index dim = 1;
};

inline void validate(const BoundParams& p) {
    if (!(p.sigma >= 0.0) || !(p.b_norm >= 0.0) || !(p.d_norm >= 0.0))
        throw ConfigError("bound params: sigma, B and D must be nonnegative");
    if (!(p.lambda > 0.0)) throw ConfigError("bound params: lambda must be > 0");
    if (!(p.delta > 0.0 && p.delta < 1.0)) throw ConfigError("bound params: delta must lie in (0,1)");
    if (p.dim < 1) throw ConfigError("bound params: dim must be >= 1");
}

/// Ellipsoid radius after `n_obs` absorbed observations.
inline double beta(const BoundParams& p, std::int64_t n_obs) {
    const double d = static_cast<double>(p.dim);
    const double inner =
        (1.0 + p.d_norm * p.d_norm * (1.0 + static_cast<double>(n_obs)) / p.lambda) / p.delta;
    return p.sigma * std::sqrt(d * std::log(inner)) + p.b_norm * std::sqrt(p.lambda);
}

/// sigma*sqrt(2 n L) + (2/3) L with L = log(3 max(n,1)^2 / delta).
inline double martingale_bound(double sigma, std::int64_t n_obs, double delta) {
    const double n = static_cast<double>(n_obs);
    const double m = std::max(n, 1.0);
    const double log_term = std::log(3.0 * m * m / delta);
    return sigma * std::sqrt(2.0 * n * log_term) + (2.0 / 3.0) * log_term;
}

template <typename Scalar>
struct ConfidenceEllipsoid {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Vector center;
    Matrix shape;      // V
    Matrix shape_inv;  // V^{-1}
    Scalar radius = Scalar(0);

    Eigen::Index dim() const { return center.size(); }
};

using ConfidenceEllipsoidd = ConfidenceEllipsoid<double>;

template <typename Scalar>
ConfidenceEllipsoid<Scalar> make_ellipsoid(const RlsState<Scalar>& s, Scalar radius) {
    return {s.theta_hat, s.v, s.v_inv, radius};
}

/// Builds an ellipsoid from its center, V^{-1} and radius; V is recovered by inversion.
template <typename Scalar>
ConfidenceEllipsoid<Scalar> make_ellipsoid(const typename ConfidenceEllipsoid<Scalar>::Vector& center,
                                           const typename ConfidenceEllipsoid<Scalar>::Matrix& shape_inv,
                                           Scalar radius) {
    if (shape_inv.rows() != center.size() || shape_inv.cols() != center.size())
        throw DimensionError("make_ellipsoid: shape does not match center");
    if (radius < Scalar(0)) throw ConfigError("make_ellipsoid: negative radius");
    using Matrix = typename ConfidenceEllipsoid<Scalar>::Matrix;
    Matrix shape = shape_inv.llt().solve(Matrix::Identity(center.size(), center.size()));
    return {center, shape, shape_inv, radius};
}

namespace detail {
template <typename Scalar, typename Derived>
void check_dim(const ConfidenceEllipsoid<Scalar>& ell, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != ell.dim()) throw DimensionError("ellipsoid: dimension mismatch");
}
}  // namespace detail

/// ||x||_{V^{-1}} for the ellipsoid's shape.
template <typename Scalar, typename Derived>
Scalar dual_norm(const ConfidenceEllipsoid<Scalar>& ell, const Eigen::MatrixBase<Derived>& x) {
    detail::check_dim(ell, x);
    return std::sqrt(std::max(x.dot(ell.shape_inv * x), Scalar(0)));
}

template <typename Scalar, typename Derived>
Scalar ellipsoid_linear_min(const ConfidenceEllipsoid<Scalar>& ell, const Eigen::MatrixBase<Derived>& x) {
    return ell.center.dot(x) - ell.radius * dual_norm(ell, x);
}

template <typename Scalar, typename Derived>
Scalar ellipsoid_linear_max(const ConfidenceEllipsoid<Scalar>& ell, const Eigen::MatrixBase<Derived>& x) {
    return ell.center.dot(x) + ell.radius * dual_norm(ell, x);
}

/// max{min_theta <theta, x>, 0}: valid when the true value is known to be nonnegative.
template <typename Scalar, typename Derived>
Scalar ellipsoid_linear_min_truncated(const ConfidenceEllipsoid<Scalar>& ell,
                                      const Eigen::MatrixBase<Derived>& x) {
    return std::max(ellipsoid_linear_min(ell, x), Scalar(0));
}

/// Boundary point attaining the minimum (or the maximum when `maximize`).
/// Returns the center for x = 0.
template <typename Scalar, typename Derived>
typename ConfidenceEllipsoid<Scalar>::Vector ellipsoid_witness(const ConfidenceEllipsoid<Scalar>& ell,
                                                               const Eigen::MatrixBase<Derived>& x,
                                                               bool maximize) {
    const Scalar n = dual_norm(ell, x);
    if (n == Scalar(0)) return ell.center;
    const Scalar sign = maximize ? Scalar(1) : Scalar(-1);
    return ell.center + sign * (ell.radius / n) * (ell.shape_inv * x);
}

template <typename Scalar, typename Derived>
bool contains(const ConfidenceEllipsoid<Scalar>& ell, const Eigen::MatrixBase<Derived>& theta) {
    detail::check_dim(ell, theta);
    const typename ConfidenceEllipsoid<Scalar>::Vector diff = theta - ell.center;
    return diff.dot(ell.shape * diff) <= ell.radius * ell.radius + Scalar(kMembershipSlack);
}

}  // namespace cbandit
