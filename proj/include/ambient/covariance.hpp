#pragma once

#include <Eigen/Dense>

#include "ambient/errors.hpp"

namespace ambient {

/// Column means of a samples-by-variables matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> column_mean(
    const Eigen::MatrixBase<Derived>& x) {
    if (x.rows() < 1) throw ConfigError("column_mean: empty series");
    return x.colwise().mean().transpose();
}

/// Unbiased sample cross-covariance of two samples-by-variables matrices:
///
///     C(k, j) = sum_i (x(i,k) - xbar_k) (y(i,j) - ybar_j) / (n - 1)
///
/// Requires matching sample counts and n >= 2.
template <typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> sample_covariance(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
    using Scalar = typename DerivedX::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (x.rows() != y.rows()) throw ConfigError("sample_covariance: sample counts differ");
    if (x.rows() < 2) throw ConfigError("sample_covariance: need at least 2 samples");
    const Matrix xc = x.rowwise() - x.colwise().mean();
    const Matrix yc = y.rowwise() - y.colwise().mean();
    return (xc.transpose() * yc) / static_cast<Scalar>(x.rows() - 1);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> sample_covariance(
    const Eigen::MatrixBase<Derived>& x) {
    auto c = sample_covariance(x, x);
    // exact symmetry
    return (c + c.transpose()) / typename Derived::Scalar(2);
}

}  // namespace ambient
