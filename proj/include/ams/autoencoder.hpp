#ifndef AMS_AUTOENCODER_HPP
#define AMS_AUTOENCODER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/manifold.hpp"
#include "ams/matrix.hpp"
#include "ams/rng.hpp"

namespace ams {

enum class Activation : std::uint8_t {
    Tanh,     // used on all hidden layers
    Identity, // linear variant for closed-form test fixtures
};

/** Fully connected autoencoder with a symmetric layer stack.
 *
 * The canonical architecture is [d, h1, h2, k, h2, h1, d]: five hidden
 * layers around the width-k central code, tanh on hidden layers and a linear
 * output. weights[t] maps activation t to activation t+1. */
struct AutoencoderModel {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix> weights; // weights[t]: layer_dims[t+1] x layer_dims[t]
    std::vector<Vector> biases;  // biases[t]: layer_dims[t+1]
    Activation hidden_activation = Activation::Tanh;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    /// Activation index of the central code z.
    std::size_t latent_index() const { return num_layers() / 2; }
    std::size_t latent_dim() const { return layer_dims[latent_index()]; }
};

/** Training hyperparameters for the joint objective
 *  alpha * reconstruction + beta * alignment.
 *
 * The default weights 9 and 77 are the grid-searched operating point. */
struct TrainingConfig {
    double alpha = 9.0;
    double beta = 77.0;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t epochs = 500;
    std::uint64_t seed = 0;

    void validate() const {
        if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0) {
            throw parameter_error("training: alpha and beta must be >= 0 with "
                                  "alpha + beta > 0");
        }
        if (!(learning_rate > 0.0)) {
            throw parameter_error("training: learning rate must be positive");
        }
        if (batch_size == 0) {
            throw parameter_error("training: batch size must be positive");
        }
    }
};

/** Per-epoch loss series recorded during training. */
struct TrainingReport {
    std::vector<double> total_loss;
    std::vector<double> reconstruction_loss; // unweighted sums
    std::vector<double> alignment_loss;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::size_t interp_width(std::size_t d, std::size_t k, double d_pow,
                                double k_pow) {
    const double w = std::pow(static_cast<double>(d), d_pow) *
                     std::pow(static_cast<double>(k), k_pow);
    return std::max<std::size_t>(4, static_cast<std::size_t>(std::llround(w)));
}

} // namespace detail

/** Builds the canonical architecture with Xavier-uniform weights.
 *
 * Hidden widths interpolate geometrically between d and k:
 * h1 = round(d^(2/3) k^(1/3)), h2 = round(d^(1/3) k^(2/3)), floored at 4. */
inline AutoencoderModel make_autoencoder(std::size_t d, std::size_t k,
                                         Rng &rng) {
    if (d == 0 || k == 0) {
        throw parameter_error("autoencoder: input and code dimensions must be "
                              "positive");
    }
    const std::size_t h1 = detail::interp_width(d, k, 2.0 / 3.0, 1.0 / 3.0);
    const std::size_t h2 = detail::interp_width(d, k, 1.0 / 3.0, 2.0 / 3.0);

    AutoencoderModel model;
    model.layer_dims = {d, h1, h2, k, h2, h1, d};
    for (std::size_t t = 0; t + 1 < model.layer_dims.size(); ++t) {
        const std::size_t fan_in = model.layer_dims[t];
        const std::size_t fan_out = model.layer_dims[t + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (std::size_t r = 0; r < fan_out; ++r) {
            for (std::size_t c = 0; c < fan_in; ++c) {
                w(r, c) = rng.uniform(-limit, limit);
            }
        }
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    return model;
}

/// All layer activations a_0..a_L for one input (a_0 = x, a_L = x_hat).
inline std::vector<Vector> forward_trace(const AutoencoderModel &model,
                                         std::span<const double> x) {
    if (x.size() != model.input_dim()) {
        throw dimension_error("forward: input length " +
                              std::to_string(x.size()) + ", model expects " +
                              std::to_string(model.input_dim()));
    }
    std::vector<Vector> a;
    a.reserve(model.num_layers() + 1);
    a.emplace_back(x.begin(), x.end());
    for (std::size_t t = 0; t < model.num_layers(); ++t) {
        Vector u = matvec(model.weights[t], a.back());
        const Vector &bias = model.biases[t];
        const bool output_layer = (t + 1 == model.num_layers());
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] += bias[i];
            if (!output_layer && model.hidden_activation == Activation::Tanh) {
                u[i] = std::tanh(u[i]);
            }
        }
        a.push_back(std::move(u));
    }
    return a;
}

/** Encoder plus decoder pass: returns (z, x_hat). */
inline std::pair<Vector, Vector> forward(const AutoencoderModel &model,
                                         std::span<const double> x) {
    std::vector<Vector> a = forward_trace(model, x);
    return {a[model.latent_index()], a.back()};
}

inline Vector encode(const AutoencoderModel &model, std::span<const double> x) {
    return forward(model, x).first;
}

/// Encoder outputs for every row of a feature matrix, stacked as rows.
inline Matrix encode_all(const AutoencoderModel &model, const Matrix &features) {
    Matrix z(features.rows(), model.latent_dim());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const Vector code = encode(model, features.row(r));
        auto dst = z.row(r);
        for (std::size_t c = 0; c < code.size(); ++c) {
            dst[c] = code[c];
        }
    }
    return z;
}

/** Sum of squared reconstruction errors over a batch of feature rows. */
inline double reconstruction_loss(const AutoencoderModel &model,
                                  const Matrix &batch) {
    if (batch.rows() == 0) {
        throw dimension_error("reconstruction_loss: empty batch");
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        const auto x = batch.row(r);
        const Vector x_hat = forward(model, x).second;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - x_hat[i];
            loss += d * d;
        }
    }
    return loss;
}

/** Per-class constants of the alignment term.
 *
 * Holds the pre-defined prototype S^p and the embedded manifold column o of
 * every seen class, both fixed during training. Classes whose manifold
 * column has zero norm cannot be aligned; with exclude_degenerate they are
 * masked out (and reported), otherwise evaluating them throws. */
struct AlignmentTargets {
    std::vector<ClassId> class_ids;
    Matrix predefined;    // m x n
    Matrix manifold_cols; // m x (n+k), o_j stored as row j
    std::vector<std::uint8_t> eligible;
    std::vector<std::string> warnings;

    std::size_t predefined_dim() const { return predefined.cols(); }
    std::size_t combined_dim() const { return manifold_cols.cols(); }

    std::size_t index_of(ClassId label) const {
        const auto it =
            std::lower_bound(class_ids.begin(), class_ids.end(), label);
        if (it == class_ids.end() || *it != label) {
            throw ingestion_error("alignment: label " + std::to_string(label) +
                                  " missing from the manifold class set");
        }
        return static_cast<std::size_t>(it - class_ids.begin());
    }
};

inline AlignmentTargets
build_alignment_targets(const Matrix &predefined_prototypes,
                        const EmbeddedManifold &manifold,
                        bool exclude_degenerate,
                        bool normalize_predefined = false) {
    if (predefined_prototypes.rows() != manifold.num_classes()) {
        throw dimension_error("alignment: " +
                              std::to_string(predefined_prototypes.rows()) +
                              " prototype rows against " +
                              std::to_string(manifold.num_classes()) +
                              " manifold columns");
    }
    if (manifold.dim() <= predefined_prototypes.cols()) {
        throw dimension_error("alignment: manifold dimension " +
                              std::to_string(manifold.dim()) +
                              " leaves no room for expanded features beyond "
                              "the " +
                              std::to_string(predefined_prototypes.cols()) +
                              " pre-defined ones");
    }
    AlignmentTargets targets;
    targets.class_ids = manifold.class_ids;
    targets.predefined = predefined_prototypes;
    if (normalize_predefined) {
        // Optional variant: L2-normalize each S^p row before concatenation.
        for (std::size_t j = 0; j < targets.predefined.rows(); ++j) {
            auto row = targets.predefined.row(j);
            const double norm = l2_norm(row);
            if (norm > 0.0) {
                for (auto &value : row) {
                    value /= norm;
                }
            }
        }
    }
    targets.manifold_cols = transpose(manifold.o);
    targets.eligible.assign(manifold.num_classes(), 1);
    for (std::size_t j = 0; j < manifold.num_classes(); ++j) {
        if (l2_norm(targets.manifold_cols.row(j)) == 0.0) {
            if (exclude_degenerate) {
                targets.eligible[j] = 0;
                targets.warnings.push_back(
                    "class " + std::to_string(targets.class_ids[j]) +
                    " has a zero-norm manifold column; it is excluded from "
                    "the alignment term");
            }
        }
    }
    return targets;
}

inline AlignmentTargets build_alignment_targets(const SeenDataset &data,
                                                const EmbeddedManifold &manifold,
                                                bool exclude_degenerate,
                                                bool normalize_predefined = false) {
    if (data.class_ids != manifold.class_ids) {
        throw dimension_error("alignment: dataset and manifold class sets "
                              "differ");
    }
    return build_alignment_targets(data.prototypes, manifold,
                                   exclude_degenerate, normalize_predefined);
}

namespace detail {

/// Combined semantic vector [S^p_y | z] and its cosine against o_y.
struct AlignmentTerm {
    Vector combined;
    double combined_norm = 0.0;
    double target_norm = 0.0;
    double cosine = 0.0;
    bool active = false; // false when the class is excluded
};

inline AlignmentTerm alignment_term(const AlignmentTargets &targets,
                                    std::size_t class_idx,
                                    std::span<const double> z) {
    AlignmentTerm term;
    if (!targets.eligible[class_idx]) {
        return term;
    }
    const auto proto = targets.predefined.row(class_idx);
    if (proto.size() + z.size() != targets.combined_dim()) {
        throw dimension_error("alignment: code length " +
                              std::to_string(z.size()) +
                              " does not complete the " +
                              std::to_string(targets.combined_dim()) +
                              "-dimensional combined space");
    }
    term.combined.reserve(targets.combined_dim());
    term.combined.assign(proto.begin(), proto.end());
    term.combined.insert(term.combined.end(), z.begin(), z.end());

    const auto target = targets.manifold_cols.row(class_idx);
    term.combined_norm = l2_norm(term.combined);
    term.target_norm = l2_norm(target);
    if (term.target_norm == 0.0) {
        throw numerical_error(
            "alignment: degenerate zero-norm manifold column for class " +
            std::to_string(targets.class_ids[class_idx]));
    }
    if (term.combined_norm == 0.0) {
        throw numerical_error(
            "alignment: degenerate zero-norm combined semantic vector for "
            "class " + std::to_string(targets.class_ids[class_idx]));
    }
    term.cosine = dot(term.combined, target) /
                  (term.combined_norm * term.target_norm);
    term.active = true;
    return term;
}

} // namespace detail

/** Alignment loss over a batch: sum of 1 - cos(S^{p+e}_i, o_{y_i}).
 *
 * Each active term lies in [0, 2]. Classes masked out in the targets
 * contribute nothing. */
inline double alignment_loss(const AutoencoderModel &model, const Matrix &batch,
                             std::span<const ClassId> labels,
                             const AlignmentTargets &targets) {
    if (batch.rows() == 0) {
        throw dimension_error("alignment_loss: empty batch");
    }
    if (batch.rows() != labels.size()) {
        throw dimension_error("alignment_loss: batch and label counts differ");
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        const Vector z = encode(model, batch.row(r));
        const auto term = detail::alignment_term(
            targets, targets.index_of(labels[r]), z);
        if (term.active) {
            loss += 1.0 - term.cosine;
        }
    }
    return loss;
}

/** Unified objective alpha * L_r + beta * L_a over one batch.
 *
 * `targets` may be null when beta is zero; the alignment path is then never
 * entered. */
inline double total_loss(const AutoencoderModel &model, const Matrix &batch,
                         std::span<const ClassId> labels,
                         const AlignmentTargets *targets, double alpha,
                         double beta) {
    double loss = 0.0;
    if (alpha != 0.0 || beta == 0.0) {
        loss += alpha * reconstruction_loss(model, batch);
    }
    if (beta != 0.0) {
        if (targets == nullptr) {
            throw parameter_error("total_loss: alignment targets required "
                                  "when beta is nonzero");
        }
        loss += beta * alignment_loss(model, batch, labels, *targets);
    }
    return loss;
}

/** Gradients of the unified objective for every weight and bias. */
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static Gradients zeros_like(const AutoencoderModel &model) {
        Gradients g;
        for (std::size_t t = 0; t < model.num_layers(); ++t) {
            g.weights.emplace_back(model.weights[t].rows(),
                                   model.weights[t].cols());
            g.biases.emplace_back(model.biases[t].size(), 0.0);
        }
        return g;
    }
};

namespace detail {

/// d(1 - cos(s, o))/dz for the trailing z-block of s; S^p and o are constants.
inline Vector alignment_code_gradient(const AlignmentTerm &term,
                                      std::span<const double> target,
                                      std::size_t code_dim) {
    Vector grad(code_dim, 0.0);
    const std::size_t offset = term.combined.size() - code_dim;
    const double inv_cross = 1.0 / (term.combined_norm * term.target_norm);
    const double inv_ss = 1.0 / (term.combined_norm * term.combined_norm);
    for (std::size_t j = 0; j < code_dim; ++j) {
        grad[j] = -target[offset + j] * inv_cross +
                  term.cosine * term.combined[offset + j] * inv_ss;
    }
    return grad;
}

/// Backpropagates one example into grads; returns (recon, align) loss terms.
inline std::pair<double, double>
accumulate_example(const AutoencoderModel &model, std::span<const double> x,
                   std::size_t class_idx, const AlignmentTargets *targets,
                   double alpha, double beta, Gradients &grads) {
    const std::vector<Vector> a = forward_trace(model, x);
    const std::size_t layers = model.num_layers();
    const std::size_t latent = model.latent_index();

    double recon = 0.0;
    const Vector &x_hat = a.back();
    Vector ga(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        const double diff = x_hat[i] - x[i];
        recon += diff * diff;
        ga[i] = 2.0 * alpha * diff;
    }

    double align = 0.0;
    Vector align_grad;
    if (beta != 0.0 && targets != nullptr) {
        const auto term = alignment_term(*targets, class_idx, a[latent]);
        if (term.active) {
            align = 1.0 - term.cosine;
            align_grad = alignment_code_gradient(
                term, targets->manifold_cols.row(class_idx),
                model.latent_dim());
        }
    }

    for (std::size_t t = layers; t > 0; --t) {
        const std::size_t out = t; // activation index produced by weights[t-1]
        Vector du = std::move(ga);
        if (out != layers && model.hidden_activation == Activation::Tanh) {
            for (std::size_t i = 0; i < du.size(); ++i) {
                du[i] *= 1.0 - a[out][i] * a[out][i];
            }
        }
        Matrix &dw = grads.weights[t - 1];
        Vector &db = grads.biases[t - 1];
        const Vector &prev = a[t - 1];
        for (std::size_t r = 0; r < du.size(); ++r) {
            const double d = du[r];
            db[r] += d;
            if (d == 0.0) {
                continue;
            }
            auto wrow = dw.row(r);
            for (std::size_t c = 0; c < prev.size(); ++c) {
                wrow[c] += d * prev[c];
            }
        }
        if (t - 1 == 0) {
            break;
        }
        const Matrix &w = model.weights[t - 1];
        ga.assign(w.cols(), 0.0);
        for (std::size_t r = 0; r < w.rows(); ++r) {
            const double d = du[r];
            if (d == 0.0) {
                continue;
            }
            const auto wrow = w.row(r);
            for (std::size_t c = 0; c < w.cols(); ++c) {
                ga[c] += wrow[c] * d;
            }
        }
        if (t - 1 == latent && !align_grad.empty()) {
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += beta * align_grad[i];
            }
        }
    }
    return {recon, align};
}

} // namespace detail

/** Analytic gradients of total_loss over a batch.
 *
 * The alignment term differentiates only through the z-block of the combined
 * vector; the pre-defined prototypes and the manifold are constants. */
inline Gradients backward(const AutoencoderModel &model, const Matrix &batch,
                          std::span<const ClassId> labels,
                          const AlignmentTargets *targets, double alpha,
                          double beta) {
    if (batch.rows() != labels.size()) {
        throw dimension_error("backward: batch and label counts differ");
    }
    if (beta != 0.0 && targets == nullptr) {
        throw parameter_error("backward: alignment targets required when "
                              "beta is nonzero");
    }
    Gradients grads = Gradients::zeros_like(model);
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        const std::size_t class_idx =
            (beta != 0.0) ? targets->index_of(labels[r]) : 0;
        detail::accumulate_example(model, batch.row(r), class_idx, targets,
                                   alpha, beta, grads);
    }
    return grads;
}

namespace detail {

struct AdamState {
    std::vector<Matrix> mw, vw;
    std::vector<Vector> mb, vb;
    std::size_t step = 0;

    explicit AdamState(const AutoencoderModel &model) {
        for (std::size_t t = 0; t < model.num_layers(); ++t) {
            mw.emplace_back(model.weights[t].rows(), model.weights[t].cols());
            vw.emplace_back(model.weights[t].rows(), model.weights[t].cols());
            mb.emplace_back(model.biases[t].size(), 0.0);
            vb.emplace_back(model.biases[t].size(), 0.0);
        }
    }

    void update(AutoencoderModel &model, const Gradients &grads, double lr) {
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t t = 0; t < model.num_layers(); ++t) {
            double *w = model.weights[t].data();
            double *m = mw[t].data();
            double *v = vw[t].data();
            const double *g = grads.weights[t].data();
            for (std::size_t i = 0; i < model.weights[t].size(); ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            }
            Vector &b = model.biases[t];
            for (std::size_t i = 0; i < b.size(); ++i) {
                mb[t][i] = beta1 * mb[t][i] + (1.0 - beta1) * grads.biases[t][i];
                vb[t][i] = beta2 * vb[t][i] +
                           (1.0 - beta2) * grads.biases[t][i] * grads.biases[t][i];
                b[i] -= lr * (mb[t][i] / bc1) / (std::sqrt(vb[t][i] / bc2) + eps);
            }
        }
    }
};

} // namespace detail

/** Trains the autoencoder with minibatch Adam on the joint objective.
 *
 * The expanded dimension k is manifold.dim() minus the prototype dimension.
 * Runs are bit-deterministic for a fixed seed and config; when beta is zero
 * the manifold is never consulted. Throws numerical_error if the loss stops
 * being finite. */
inline std::pair<AutoencoderModel, TrainingReport>
train(const SeenDataset &data, const EmbeddedManifold &manifold,
      const TrainingConfig &config) {
    config.validate();
    data.validate();

    const std::size_t n = data.prototype_dim();
    if (manifold.dim() <= n) {
        throw parameter_error("training: manifold dimension " +
                              std::to_string(manifold.dim()) +
                              " must exceed the pre-defined dimension " +
                              std::to_string(n));
    }
    const std::size_t k = manifold.dim() - n;

    Rng rng(config.seed);
    AutoencoderModel model = make_autoencoder(data.feature_dim(), k, rng);

    TrainingReport report;
    AlignmentTargets targets;
    const bool use_alignment = config.beta != 0.0;
    if (use_alignment) {
        targets = build_alignment_targets(data, manifold,
                                          /*exclude_degenerate=*/true);
        report.warnings = targets.warnings;
    }

    const std::size_t l = data.num_examples();
    std::vector<std::size_t> class_of(l);
    for (std::size_t i = 0; i < l; ++i) {
        class_of[i] = data.class_index(data.labels[i]);
    }

    detail::AdamState adam(model);
    std::vector<std::size_t> order(l);
    for (std::size_t i = 0; i < l; ++i) {
        order[i] = i;
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_recon = 0.0;
        double epoch_align = 0.0;
        for (std::size_t start = 0; start < l; start += config.batch_size) {
            const std::size_t stop = std::min(l, start + config.batch_size);
            Gradients grads = Gradients::zeros_like(model);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const auto losses = detail::accumulate_example(
                    model, data.features.row(i), class_of[i],
                    use_alignment ? &targets : nullptr, config.alpha,
                    config.beta, grads);
                epoch_recon += losses.first;
                epoch_align += losses.second;
            }
            adam.update(model, grads, config.learning_rate);
        }
        const double total =
            config.alpha * epoch_recon + config.beta * epoch_align;
        if (!std::isfinite(total)) {
            std::ostringstream what;
            what << "training diverged at epoch " << epoch
                 << " (learning rate " << config.learning_rate << ")";
            throw numerical_error(what.str());
        }
        report.reconstruction_loss.push_back(epoch_recon);
        report.alignment_loss.push_back(epoch_align);
        report.total_loss.push_back(total);
    }
    return {std::move(model), std::move(report)};
}

} // namespace ams

#endif // AMS_AUTOENCODER_HPP
