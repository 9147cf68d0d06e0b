#pragma once

// Incremental ridge regression over a stream of (feature, reward) pairs.
//
// The design matrix V = lambda*I + sum phi*phi^T and its inverse are both
// maintained. The inverse is updated with the Sherman-Morrison identity in
// O(d^2) and rebuilt from a Cholesky factorization of V every
// `refresh_interval` updates so that rounding drift stays bounded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cbandit/errors.hpp"

namespace cbandit {

inline constexpr std::int64_t kDefaultRefreshInterval = 10000;

template <typename Scalar>
struct RlsState {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Eigen::Index dim = 0;
    Scalar lambda = Scalar(1);
    Matrix v;
    Matrix v_inv;
    Vector xty;
    Vector theta_hat;
    std::int64_t count = 0;
    // 0 disables the periodic rebuild of v_inv.
    std::int64_t refresh_interval = kDefaultRefreshInterval;
};

using RlsStated = RlsState<double>;

template <typename Scalar>
RlsState<Scalar> rls_init(Eigen::Index dim, Scalar lambda,
                          std::int64_t refresh_interval = kDefaultRefreshInterval) {
    if (dim < 1) throw ConfigError("rls: dimension must be >= 1");
    if (!(lambda > Scalar(0))) throw ConfigError("rls: lambda must be > 0");
    if (refresh_interval < 0) throw ConfigError("rls: refresh interval must be >= 0");

    RlsState<Scalar> s;
    s.dim = dim;
    s.lambda = lambda;
    s.v = RlsState<Scalar>::Matrix::Identity(dim, dim) * lambda;
    s.v_inv = RlsState<Scalar>::Matrix::Identity(dim, dim) / lambda;
    s.xty = RlsState<Scalar>::Vector::Zero(dim);
    s.theta_hat = RlsState<Scalar>::Vector::Zero(dim);
    s.refresh_interval = refresh_interval;
    return s;
}

/// Rebuilds v_inv and theta_hat from v and xty by a Cholesky solve.
template <typename Scalar>
void rls_refresh(RlsState<Scalar>& s) {
    Eigen::LLT<typename RlsState<Scalar>::Matrix> llt(s.v);
    s.v_inv = llt.solve(RlsState<Scalar>::Matrix::Identity(s.dim, s.dim));
    s.v_inv = (s.v_inv + s.v_inv.transpose()).eval() * Scalar(0.5);
    s.theta_hat = llt.solve(s.xty);
}

template <typename Scalar, typename Derived>
void rls_update(RlsState<Scalar>& s, const Eigen::MatrixBase<Derived>& phi, Scalar reward) {
    if (phi.size() != s.dim) {
        throw DimensionError("rls_update: feature has dimension " + std::to_string(phi.size()) +
                             ", state has " + std::to_string(s.dim));
    }
    const typename RlsState<Scalar>::Vector x = phi;
    s.v.noalias() += x * x.transpose();
    s.xty.noalias() += reward * x;
    ++s.count;

    if (s.refresh_interval > 0 && s.count % s.refresh_interval == 0) {
        rls_refresh(s);
        return;
    }
    const typename RlsState<Scalar>::Vector vx = s.v_inv * x;
    const Scalar denom = Scalar(1) + x.dot(vx);
    s.v_inv.noalias() -= (vx / denom) * vx.transpose();
    s.theta_hat.noalias() = s.v_inv * s.xty;
}

/// sqrt(x^T V^{-1} x).
template <typename Scalar, typename Derived>
Scalar weighted_norm(const RlsState<Scalar>& s, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != s.dim) throw DimensionError("weighted_norm: dimension mismatch");
    const Scalar q = x.dot(s.v_inv * x);
    return std::sqrt(std::max(q, Scalar(0)));
}

}  // namespace cbandit
