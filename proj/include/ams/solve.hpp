#ifndef AMS_SOLVE_HPP
#define AMS_SOLVE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"

namespace ams {
namespace detail {

/** In-place Cholesky factorization G = L L^T (lower triangle of g).
 *
 * Returns false when a pivot drops to or below pivot_floor, signalling that
 * G is not safely positive definite. */
inline bool try_cholesky(Matrix &g, double pivot_floor = 0.0) {
    const std::size_t n = g.rows();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        max_diag = std::max(max_diag, std::abs(g(i, i)));
    }
    const double floor = std::max(pivot_floor, 1e-13 * max_diag);
    for (std::size_t j = 0; j < n; ++j) {
        double d = g(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            d -= g(j, k) * g(j, k);
        }
        if (!(d > floor)) {
            return false;
        }
        const double ljj = std::sqrt(d);
        g(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = g(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                v -= g(i, k) * g(j, k);
            }
            g(i, j) = v / ljj;
        }
    }
    return true;
}

/// Solve L L^T x = b given the factor from try_cholesky.
inline Vector cholesky_solve(const Matrix &l, std::span<const double> b) {
    const std::size_t n = l.rows();
    Vector x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        double v = x[i];
        for (std::size_t k = 0; k < i; ++k) {
            v -= l(i, k) * x[k];
        }
        x[i] = v / l(i, i);
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double v = x[i];
        for (std::size_t k = i + 1; k < n; ++k) {
            v -= l(k, i) * x[k];
        }
        x[i] = v / l(i, i);
    }
    return x;
}

/// A^T A for a row-major A, exploiting symmetry.
inline Matrix gram(const Matrix &a) {
    const std::size_t n = a.cols();
    Matrix g(n, n);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        for (std::size_t i = 0; i < n; ++i) {
            const double ri = row[i];
            if (ri == 0.0) {
                continue;
            }
            for (std::size_t j = i; j < n; ++j) {
                g(i, j) += ri * row[j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            g(i, j) = g(j, i);
        }
    }
    return g;
}

} // namespace detail

/** Least-squares solution of min ||a*theta - b||_2 via normal equations.
 *
 * When the Gram matrix is rank deficient the system is re-solved with
 * Tikhonov damping 1e-10*I, which picks a solution close to the minimum-norm
 * minimizer. */
inline Vector least_squares(const Matrix &a, std::span<const double> b) {
    if (a.rows() == 0 || a.cols() == 0) {
        throw dimension_error("least_squares: empty system " + shape_string(a));
    }
    if (a.rows() != b.size()) {
        throw dimension_error("least_squares: matrix " + shape_string(a) +
                              " against rhs of length " +
                              std::to_string(b.size()));
    }
    const std::size_t n = a.cols();
    Matrix g = detail::gram(a);
    Vector rhs(n, 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        for (std::size_t c = 0; c < n; ++c) {
            rhs[c] += row[c] * b[r];
        }
    }

    Matrix factor = g;
    if (!detail::try_cholesky(factor)) {
        factor = g;
        for (std::size_t i = 0; i < n; ++i) {
            factor(i, i) += 1e-10;
        }
        if (!detail::try_cholesky(factor, 0.0)) {
            throw numerical_error(
                "least_squares: normal equations not solvable even with "
                "Tikhonov damping (" + shape_string(a) + " system)");
        }
    }
    return detail::cholesky_solve(factor, rhs);
}

/** Solve the SPD system G X = B for a matrix of right-hand sides.
 *
 * Throws numerical_error naming `context` if G is not positive definite. */
inline Matrix solve_spd(const Matrix &g, const Matrix &b,
                        const std::string &context) {
    if (g.rows() != g.cols() || g.rows() != b.rows()) {
        throw dimension_error("solve_spd: G is " + shape_string(g) +
                              ", B is " + shape_string(b));
    }
    Matrix factor = g;
    if (!detail::try_cholesky(factor)) {
        throw numerical_error(context);
    }
    Matrix x(b.rows(), b.cols());
    Vector col(b.rows());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t r = 0; r < b.rows(); ++r) {
            col[r] = b(r, c);
        }
        const Vector sol = detail::cholesky_solve(factor, col);
        for (std::size_t r = 0; r < b.rows(); ++r) {
            x(r, c) = sol[r];
        }
    }
    return x;
}

} // namespace ams

#endif // AMS_SOLVE_HPP
