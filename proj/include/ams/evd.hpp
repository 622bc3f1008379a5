#ifndef AMS_EVD_HPP
#define AMS_EVD_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <vector>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"

namespace ams {

/** Eigendecomposition of a symmetric matrix.
 *
 * Eigenvalues are sorted non-increasing; eigenvector columns are unit-norm
 * and aligned with the eigenvalues. Each column is oriented so that its
 * largest-magnitude entry (first such entry on ties) is non-negative, which
 * makes the decomposition deterministic. */
struct EvdResult {
    Vector eigenvalues;
    Matrix eigenvectors; // column i pairs with eigenvalues[i]
};

/** Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
 *
 * The input is symmetrized as (A + A^T)/2 before decomposition. Intended for
 * the moderate sizes that appear here (class-count by class-count Gram
 * matrices); accuracy is near machine precision.
 *
 * Throws dimension_error for non-square input and numerical_error if the
 * sweep cap is reached without convergence. */
inline EvdResult symmetric_evd(const Matrix &a) {
    if (a.rows() != a.cols()) {
        throw dimension_error("symmetric_evd: matrix is " + shape_string(a) +
                              ", expected square");
    }
    const std::size_t n = a.rows();
    EvdResult result;
    result.eigenvalues.assign(n, 0.0);
    result.eigenvectors = Matrix::identity(n);
    if (n == 0) {
        return result;
    }

    Matrix s(n, n);
    double frob = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            s(r, c) = 0.5 * (a(r, c) + a(c, r));
            frob += s(r, c) * s(r, c);
        }
    }
    frob = std::sqrt(frob);
    Matrix &v = result.eigenvectors;

    const double conv_tol = 1e-15 * frob;
    const int max_sweeps = 100;
    bool converged = (frob == 0.0);
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                off += s(p, q) * s(p, q);
            }
        }
        if (std::sqrt(2.0 * off) <= conv_tol) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double app = s(p, p);
                const double aqq = s(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                double t;
                if (tau >= 0.0) {
                    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
                } else {
                    t = 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                }
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;

                s(p, p) = app - t * apq;
                s(q, q) = aqq + t * apq;
                s(p, q) = 0.0;
                s(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) {
                        continue;
                    }
                    const double skp = s(k, p);
                    const double skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(p, k) = s(k, p);
                    s(k, q) = sn * skp + c * skq;
                    s(q, k) = s(k, q);
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        std::ostringstream what;
        what << "symmetric_evd: no convergence after " << max_sweeps
             << " sweeps on " << n << "x" << n << " matrix";
        throw numerical_error(what.str());
    }

    // Sort eigenpairs descending; stable so equal eigenvalues keep their
    // sweep order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return s(i, i) > s(j, j);
    });

    Matrix sorted_v(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t src = order[c];
        result.eigenvalues[c] = s(src, src);
        // Orient: first entry of largest magnitude must be non-negative.
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double mag = std::abs(v(r, src));
            if (mag > best) {
                best = mag;
                arg = r;
            }
        }
        const double flip = (v(arg, src) < 0.0) ? -1.0 : 1.0;
        for (std::size_t r = 0; r < n; ++r) {
            sorted_v(r, c) = flip * v(r, src);
        }
    }
    result.eigenvectors = std::move(sorted_v);
    return result;
}

} // namespace ams

#endif // AMS_EVD_HPP
