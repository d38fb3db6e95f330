#pragma once

#include <Eigen/Dense>

#include "ambient/errors.hpp"

namespace ambient {

template <typename Derived>
bool is_hurwitz(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() == 0) return true;
    using Matrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::EigenSolver<Matrix> es(Matrix(a), false);
    if (es.info() != Eigen::Success) return false;
    return (es.eigenvalues().real().array() < 0).all();
}

// Solves A X + X A^T + Q = 0 by forming the Kronecker sum I (x) A + A (x) I
// and factoring it directly. Dense, O(n^6); intended for the small load
// blocks handled here (n <= ~30).
template <typename DerivedA, typename DerivedQ>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
solve_continuous_lyapunov(const Eigen::MatrixBase<DerivedA>& a,
                          const Eigen::MatrixBase<DerivedQ>& q) {
    using Scalar = typename DerivedA::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index n = a.rows();
    if (a.cols() != n || q.rows() != n || q.cols() != n) {
        throw ConfigError("solve_continuous_lyapunov: A and Q must be square and equal size");
    }
    Matrix k = Matrix::Zero(n * n, n * n);
    // vec(A X) = (I (x) A) vec X and vec(X A^T) = (A (x) I) vec X, column-major.
    for (Eigen::Index col = 0; col < n; ++col) {
        k.block(col * n, col * n, n, n) += a;
        for (Eigen::Index row = 0; row < n; ++row) {
            k.block(row * n, col * n, n, n).diagonal().array() += a(row, col);
        }
    }
    Eigen::FullPivLU<Matrix> lu(k);
    if (!lu.isInvertible()) {
        throw NumericalError("solve_continuous_lyapunov: no unique solution");
    }
    const Vector rhs = -Eigen::Map<const Vector>(Matrix(q).data(), n * n);
    const Vector x = lu.solve(rhs);
    Matrix out = Eigen::Map<const Matrix>(x.data(), n, n);
    return out;
}

/// Stationary covariance C of dx = A x dt + B dW, i.e. the solution of
/// A C + C A^T = -B B^T. Throws NumericalError("unstable system") unless A is
/// Hurwitz. The result is symmetrized.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
lyapunov_stationary_covariance(const Eigen::MatrixBase<DerivedA>& a,
                               const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (!is_hurwitz(a)) throw NumericalError("unstable system");
    const Matrix q = b * b.transpose();
    const Matrix c = solve_continuous_lyapunov(a, q);
    return (c + c.transpose()) / Scalar(2);
}

}  // namespace ambient
