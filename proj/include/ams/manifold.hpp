#ifndef AMS_MANIFOLD_HPP
#define AMS_MANIFOLD_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/evd.hpp"
#include "ams/matrix.hpp"

namespace ams {

/** Arithmetic mean of the visual features of each seen class.
 *
 * Row i of centers is the mean of all examples labeled class_ids[i];
 * classes are ordered by ascending label. */
struct ClassCenters {
    Matrix centers; // m x d
    std::vector<ClassId> class_ids;
};

/** Symmetric matrix of Euclidean distances between class centers. */
struct DistanceMatrix {
    Matrix d; // m x m, zero diagonal
};

/** Low-dimensional embedding of the class centers.
 *
 * Column j of o is the embedded coordinate vector of class_ids[j]. Rows at
 * or beyond effective_rank are identically zero: a Gram matrix of m centered
 * points has rank at most m-1, so when the requested dimension exceeds it the
 * extra coordinates carry no structure and are zero-padded. */
struct EmbeddedManifold {
    Matrix o; // target_dim x m
    std::vector<ClassId> class_ids;
    std::size_t effective_rank = 0;

    std::size_t dim() const { return o.rows(); }
    std::size_t num_classes() const { return o.cols(); }
};

inline ClassCenters compute_class_centers(const SeenDataset &data) {
    ClassCenters out;
    out.class_ids = data.class_ids;
    out.centers = Matrix(data.num_classes(), data.feature_dim());
    std::vector<std::size_t> counts(data.num_classes(), 0);
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const std::size_t c = data.class_index(data.labels[i]);
        const auto row = data.features.row(i);
        auto acc = out.centers.row(c);
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc[j] += row[j];
        }
        ++counts[c];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            throw ingestion_error("class " + std::to_string(out.class_ids[c]) +
                                  " has no examples");
        }
        auto acc = out.centers.row(c);
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (double &x : acc) {
            x *= inv;
        }
    }
    return out;
}

inline DistanceMatrix pairwise_distances(const ClassCenters &centers) {
    const std::size_t m = centers.centers.rows();
    if (m < 2) {
        throw dimension_error("pairwise_distances: need at least 2 centers");
    }
    DistanceMatrix out;
    out.d = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double dist =
                euclidean_distance(centers.centers.row(i), centers.centers.row(j));
            out.d(i, j) = dist;
            out.d(j, i) = dist;
        }
    }
    return out;
}

/** Gram matrix of the embedded points from the distance matrix.
 *
 * b_ij = -1/2 (d_ij^2 - rowmean_i - colmean_j + grandmean), where the means
 * are taken over squared distances. Rows and columns of the result sum to
 * zero, which centers the embedding at the origin. */
inline Matrix double_center(const DistanceMatrix &dist) {
    const std::size_t m = dist.d.rows();
    Matrix sq(m, m);
    Vector row_sq(m, 0.0);
    Vector col_sq(m, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double v = dist.d(i, j) * dist.d(i, j);
            sq(i, j) = v;
            row_sq[i] += v;
            col_sq[j] += v;
            grand += v;
        }
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    for (double &x : row_sq) {
        x *= inv_m;
    }
    for (double &x : col_sq) {
        x *= inv_m;
    }
    grand *= inv_m * inv_m;

    Matrix b(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            b(i, j) = -0.5 * (sq(i, j) - row_sq[i] - col_sq[j] + grand);
        }
    }
    return b;
}

/** Spectral embedding of a double-centered Gram matrix.
 *
 * Row i of the result is sqrt(lambda_i) * v_i^T for the i-th largest
 * eigenpair. Eigenvalues below 1e-10 * lambda_max, and all negative ones
 * (possible when the distances are noisy or non-Euclidean), are clamped to
 * zero and their rows left blank. */
inline EmbeddedManifold embed(const Matrix &gram, std::size_t target_dim,
                              std::vector<ClassId> class_ids) {
    if (target_dim == 0) {
        throw dimension_error("embed: target dimension must be positive");
    }
    if (gram.rows() != gram.cols() || gram.rows() != class_ids.size()) {
        throw dimension_error("embed: Gram matrix " + shape_string(gram) +
                              " against " + std::to_string(class_ids.size()) +
                              " classes");
    }
    const std::size_t m = gram.rows();
    const EvdResult evd = symmetric_evd(gram);
    const double lambda_max = evd.eigenvalues.empty()
                                  ? 0.0
                                  : std::max(evd.eigenvalues[0], 0.0);
    const double clamp = 1e-10 * lambda_max;

    EmbeddedManifold out;
    out.class_ids = std::move(class_ids);
    out.o = Matrix(target_dim, m);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < std::min(target_dim, m); ++i) {
        const double lambda = evd.eigenvalues[i];
        if (lambda <= clamp) {
            break; // smaller or negative eigenvalues are all clamped
        }
        const double scale = std::sqrt(lambda);
        for (std::size_t j = 0; j < m; ++j) {
            out.o(i, j) = scale * evd.eigenvectors(j, i);
        }
        ++rank;
    }
    out.effective_rank = rank;
    return out;
}

/// Extraction chain from precomputed centers: distances, double centering,
/// embedding.
inline EmbeddedManifold extract_manifold(const ClassCenters &centers,
                                         std::size_t target_dim) {
    const DistanceMatrix dist = pairwise_distances(centers);
    const Matrix gram = double_center(dist);
    return embed(gram, target_dim, centers.class_ids);
}

/// Full extraction chain: centers, distances, double centering, embedding.
inline EmbeddedManifold extract_manifold(const SeenDataset &data,
                                         std::size_t target_dim) {
    return extract_manifold(compute_class_centers(data), target_dim);
}

} // namespace ams

#endif // AMS_MANIFOLD_HPP
