#ifndef AMS_SYNTHETIC_HPP
#define AMS_SYNTHETIC_HPP

#include <cstddef>
#include <cstdint>
#include <utility>

#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/rng.hpp"

namespace ams {

/** Shape of a synthetic recognition problem.
 *
 * Classes live as centers in a low-dimensional latent space. Visual features
 * are a random linear lift of the class center plus Gaussian example noise;
 * pre-defined prototypes are a different linear view of the same center plus
 * Gaussian per-class noise. The default noise level keeps recognition off
 * the ceiling, so the expanded semantic features have measurable headroom. */
struct SyntheticSpec {
    std::size_t m_seen = 15;
    std::size_t v_unseen = 5;
    std::size_t d = 64; // visual feature dimension
    std::size_t n = 16; // pre-defined semantic dimension
    std::size_t examples_per_class = 50;
    double noise_sigma = 0.8;
    std::uint64_t seed = 0;

    /// Latent dimension of the class centers.
    std::size_t latent_dim() const {
        return std::max<std::size_t>(2, std::min(n, d) / 2);
    }

    void validate() const {
        if (m_seen < 2 || v_unseen < 2 || d < 2 || n < 2 ||
            examples_per_class < 2) {
            throw parameter_error(
                "synthetic spec: all counts must be at least 2");
        }
        if (!(noise_sigma >= 0.0)) {
            throw parameter_error("synthetic spec: noise_sigma must be >= 0");
        }
    }
};

namespace detail {

inline Matrix gaussian_matrix(Rng &rng, std::size_t rows, std::size_t cols,
                              double scale) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = scale * rng.gaussian();
    }
    return m;
}

} // namespace detail

/** Draws a seen/unseen dataset pair from the spec, bit-deterministic per
 * seed. Seen classes get ids 0..m-1; unseen classes m..m+v-1, so the two
 * sets are always disjoint. Prototype noise is drawn per class (a fixed
 * property of the class description), example noise per example. */
inline std::pair<SeenDataset, UnseenDataset>
generate_synthetic(const SyntheticSpec &spec) {
    spec.validate();
    Rng rng(spec.seed);

    const std::size_t q = spec.latent_dim();
    const std::size_t total = spec.m_seen + spec.v_unseen;
    const double lift_scale = 1.0 / std::sqrt(static_cast<double>(q));

    // Mixing maps, then per-class centers and prototype noise, then example
    // noise, in one fixed draw order.
    const Matrix lift = detail::gaussian_matrix(rng, spec.d, q, lift_scale);
    const Matrix view = detail::gaussian_matrix(rng, spec.n, q, lift_scale);

    Matrix centers(total, q);
    Matrix prototypes(total, spec.n);
    for (std::size_t j = 0; j < total; ++j) {
        Vector c(q);
        for (auto &value : c) {
            value = rng.gaussian();
        }
        std::copy(c.begin(), c.end(), centers.row(j).begin());
        const Vector s = matvec(view, c);
        auto proto = prototypes.row(j);
        for (std::size_t i = 0; i < spec.n; ++i) {
            proto[i] = s[i] + spec.noise_sigma * rng.gaussian();
        }
    }

    const auto fill = [&](Dataset &data, std::size_t first_class,
                          std::size_t num_classes) {
        data.features =
            Matrix(num_classes * spec.examples_per_class, spec.d);
        data.labels.reserve(data.features.rows());
        data.prototypes = Matrix(num_classes, spec.n);
        std::size_t row = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            const std::size_t cls = first_class + j;
            data.class_ids.push_back(static_cast<ClassId>(cls));
            std::copy(prototypes.row(cls).begin(), prototypes.row(cls).end(),
                      data.prototypes.row(j).begin());
            const Vector base = matvec(lift, Vector(centers.row(cls).begin(),
                                                    centers.row(cls).end()));
            for (std::size_t e = 0; e < spec.examples_per_class; ++e, ++row) {
                data.labels.push_back(static_cast<ClassId>(cls));
                auto x = data.features.row(row);
                for (std::size_t i = 0; i < spec.d; ++i) {
                    x[i] = base[i] + spec.noise_sigma * rng.gaussian();
                }
            }
        }
        data.validate();
    };

    SeenDataset seen;
    UnseenDataset unseen;
    fill(seen, 0, spec.m_seen);
    fill(unseen, spec.m_seen, spec.v_unseen);
    return {std::move(seen), std::move(unseen)};
}

} // namespace ams

#endif // AMS_SYNTHETIC_HPP
