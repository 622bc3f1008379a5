#ifndef AMS_MATRIX_HPP
#define AMS_MATRIX_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "ams/errors.hpp"

namespace ams {

using Vector = std::vector<double>;

/** Dense row-major matrix of 64-bit floats.
 *
 * The universal carrier for features, prototypes, embeddings and model
 * parameters. Storage is a single contiguous buffer; row(r) exposes a row
 * as a span without copying. */
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, Vector data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            std::ostringstream what;
            what << "matrix: buffer of size " << data_.size()
                 << " does not match " << rows_ << "x" << cols_;
            throw dimension_error(what.str());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double &operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) {
        assert(r < rows_);
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const double> row(std::size_t r) const {
        assert(r < rows_);
        return {data_.data() + r * cols_, cols_};
    }

    double *data() { return data_.data(); }
    const double *data() const { return data_.data(); }

    Vector column(std::size_t c) const {
        assert(c < cols_);
        Vector out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            out[r] = (*this)(r, c);
        }
        return out;
    }

    bool all_finite() const {
        for (double x : data_) {
            if (!std::isfinite(x)) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const Matrix &a, const Matrix &b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

inline std::string shape_string(const Matrix &m) {
    std::ostringstream s;
    s << m.rows() << "x" << m.cols();
    return s.str();
}

/** Matrix product a*b. Throws dimension_error on incompatible shapes. */
inline Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols() != b.rows()) {
        throw dimension_error("matmul: incompatible shapes " + shape_string(a) +
                              " * " + shape_string(b));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            const auto brow = b.row(k);
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

inline Matrix transpose(const Matrix &a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out(c, r) = a(r, c);
        }
    }
    return out;
}

/** Matrix-vector product a*x. */
inline Vector matvec(const Matrix &a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw dimension_error("matvec: matrix " + shape_string(a) +
                              " against vector of length " +
                              std::to_string(x.size()));
    }
    Vector out(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto arow = a.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) {
            acc += arow[c] * x[c];
        }
        out[r] = acc;
    }
    return out;
}

/** Mean of all rows; returns a vector of length cols. */
inline Vector row_mean(const Matrix &a) {
    if (a.rows() == 0) {
        throw dimension_error("row_mean: matrix has no rows");
    }
    Vector out(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto arow = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out[c] += arow[c];
        }
    }
    const double inv = 1.0 / static_cast<double>(a.rows());
    for (double &x : out) {
        x *= inv;
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw dimension_error("dot: vector lengths " + std::to_string(a.size()) +
                              " and " + std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

inline double euclidean_distance(std::span<const double> a,
                                 std::span<const double> b) {
    if (a.size() != b.size()) {
        throw dimension_error("euclidean_distance: vector lengths " +
                              std::to_string(a.size()) + " and " +
                              std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/** Cosine of the angle between two nonzero vectors.
 *
 * Throws numerical_error if either vector has zero norm. */
inline double cosine_similarity(std::span<const double> a,
                                std::span<const double> b) {
    if (a.size() != b.size()) {
        throw dimension_error("cosine_similarity: vector lengths " +
                              std::to_string(a.size()) + " and " +
                              std::to_string(b.size()));
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw numerical_error("cosine_similarity: degenerate zero-norm vector");
    }
    return dot(a, b) / (na * nb);
}

} // namespace ams

#endif // AMS_MATRIX_HPP
