#ifndef AMS_PROJECTION_HPP
#define AMS_PROJECTION_HPP

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/prototypes.hpp"
#include "ams/solve.hpp"

namespace ams {

enum class Metric : std::uint8_t { Cosine, Euclidean };

inline Metric metric_from_string(const std::string &name) {
    if (name == "cosine") {
        return Metric::Cosine;
    }
    if (name == "euclidean") {
        return Metric::Euclidean;
    }
    throw parameter_error("unknown metric \"" + name +
                          "\" (expected cosine or euclidean)");
}

inline const char *to_string(Metric metric) {
    return metric == Metric::Cosine ? "cosine" : "euclidean";
}

/** Ridge-regression map from visual features to the semantic space.
 * project(x) = W x with W of shape target_dim x d. */
struct LinearProjection {
    Matrix w;
    double lambda = 1.0;

    std::size_t input_dim() const { return w.cols(); }
    std::size_t target_dim() const { return w.rows(); }
};

/** Fits W minimizing sum ||W x_i - t_i||^2 + lambda ||W||_F^2 in closed form
 * via the normal equations (X^T X + lambda I) W^T = X^T T. */
inline LinearProjection fit_projection(const Matrix &features,
                                       const Matrix &targets,
                                       double lambda = 1.0) {
    if (features.rows() != targets.rows()) {
        throw dimension_error("projection fit: " +
                              std::to_string(features.rows()) +
                              " feature rows against " +
                              std::to_string(targets.rows()) + " target rows");
    }
    if (features.rows() == 0) {
        throw dimension_error("projection fit: empty training set");
    }
    if (lambda < 0.0) {
        throw parameter_error("projection fit: lambda must be >= 0");
    }
    const std::size_t d = features.cols();
    Matrix g = detail::gram(features);
    for (std::size_t i = 0; i < d; ++i) {
        g(i, i) += lambda;
    }
    const Matrix b = matmul(transpose(features), targets);
    const std::string context =
        lambda == 0.0
            ? "projection fit: Gram matrix is singular (a positive lambda "
              "regularizes it)"
            : "projection fit: Gram matrix is numerically singular";
    LinearProjection proj;
    proj.lambda = lambda;
    proj.w = transpose(solve_spd(g, b, context));
    return proj;
}

inline Vector project(const LinearProjection &proj, std::span<const double> x) {
    if (x.size() != proj.input_dim()) {
        throw dimension_error("projection: input length " +
                              std::to_string(x.size()) + " against W with " +
                              std::to_string(proj.input_dim()) + " columns");
    }
    Vector v(x.begin(), x.end());
    return matvec(proj.w, v);
}

namespace detail {

/// Class indices ordered best match first under (distance, class id).
inline std::vector<std::size_t> rank_classes(std::span<const double> s,
                                             const Matrix &prototypes,
                                             std::span<const ClassId> ids,
                                             Metric metric) {
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(prototypes.rows());
    for (std::size_t j = 0; j < prototypes.rows(); ++j) {
        const auto proto = prototypes.row(j);
        const double dist = metric == Metric::Euclidean
                                ? euclidean_distance(s, proto)
                                : 1.0 - cosine_similarity(s, proto);
        ranked.emplace_back(dist, j);
    }
    std::sort(ranked.begin(), ranked.end(),
              [&ids](const auto &a, const auto &b) {
                  if (a.first != b.first) {
                      return a.first < b.first;
                  }
                  return ids[a.second] < ids[b.second];
              });
    std::vector<std::size_t> order(ranked.size());
    for (std::size_t j = 0; j < ranked.size(); ++j) {
        order[j] = ranked[j].second;
    }
    return order;
}

} // namespace detail

/** Nearest-prototype labels for every feature row: each example is projected
 * into the semantic space and matched against the combined prototypes. */
inline std::vector<ClassId> recognize(const LinearProjection &proj,
                                      const Matrix &features,
                                      const PrototypeTable &table,
                                      Metric metric = Metric::Cosine) {
    table.validate();
    if (table.num_classes() == 0) {
        throw parameter_error("recognition: empty prototype table");
    }
    const Matrix prototypes = table.combined();
    if (prototypes.cols() != proj.target_dim()) {
        throw dimension_error("recognition: projection target dimension " +
                              std::to_string(proj.target_dim()) +
                              " against prototype dimension " +
                              std::to_string(prototypes.cols()));
    }
    std::vector<ClassId> labels;
    labels.reserve(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const Vector s = project(proj, features.row(i));
        const auto order =
            detail::rank_classes(s, prototypes, table.class_ids, metric);
        labels.push_back(table.class_ids[order.front()]);
    }
    return labels;
}

/** Accuracy summary of nearest-prototype recognition on labeled data. */
struct EvaluationReport {
    std::vector<double> hit_at; // hit_at[i] is Hit@(i+1)
    Matrix confusion;           // rows: true class, cols: top-1 prediction
    Vector per_class_accuracy;  // top-1, one entry per class with examples
    std::vector<ClassId> class_ids;
    std::size_t num_examples = 0;
    Metric metric = Metric::Cosine;

    double hit(std::size_t k) const {
        if (k == 0 || k > hit_at.size()) {
            throw parameter_error("hit@k: k must be in [1, " +
                                  std::to_string(hit_at.size()) + "]");
        }
        return hit_at[k - 1];
    }
};

/** Computes Hit@1..Hit@K and the top-1 confusion matrix.
 *
 * K defaults to min(5, classes) when zero and may not exceed the class
 * count. Hit@k counts an example as correct when its true class appears
 * among the k nearest prototypes, so the series is non-decreasing in k and
 * reaches 1 at K = classes. */
inline EvaluationReport evaluate(const LinearProjection &proj,
                                 const Dataset &data,
                                 const PrototypeTable &table,
                                 Metric metric = Metric::Cosine,
                                 std::size_t top_k = 0) {
    table.validate();
    if (top_k == 0) {
        top_k = std::min<std::size_t>(5, table.num_classes());
    }
    if (top_k > table.num_classes()) {
        throw parameter_error("evaluate: K = " + std::to_string(top_k) +
                              " exceeds the " +
                              std::to_string(table.num_classes()) +
                              " candidate classes");
    }
    if (data.features.rows() != data.labels.size()) {
        throw dimension_error("evaluate: feature and label counts differ");
    }
    if (data.labels.empty()) {
        throw dimension_error("evaluate: no labeled examples");
    }

    const Matrix prototypes = table.combined();
    if (prototypes.cols() != proj.target_dim()) {
        throw dimension_error("evaluate: projection target dimension " +
                              std::to_string(proj.target_dim()) +
                              " against prototype dimension " +
                              std::to_string(prototypes.cols()));
    }

    const std::size_t m = table.num_classes();
    EvaluationReport report;
    report.class_ids = table.class_ids;
    report.metric = metric;
    report.num_examples = data.labels.size();
    report.confusion = Matrix(m, m);
    std::vector<std::size_t> hits(top_k, 0);

    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const std::size_t truth = table.index_of(data.labels[i]);
        const Vector s = project(proj, data.features.row(i));
        const auto order =
            detail::rank_classes(s, prototypes, table.class_ids, metric);
        report.confusion(truth, order.front()) += 1.0;
        for (std::size_t k = 0; k < top_k; ++k) {
            if (order[k] == truth) {
                for (std::size_t later = k; later < top_k; ++later) {
                    ++hits[later];
                }
                break;
            }
        }
    }

    report.hit_at.resize(top_k);
    for (std::size_t k = 0; k < top_k; ++k) {
        report.hit_at[k] = static_cast<double>(hits[k]) /
                           static_cast<double>(report.num_examples);
    }
    report.per_class_accuracy.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double count = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            count += report.confusion(j, c);
        }
        if (count > 0.0) {
            report.per_class_accuracy[j] = report.confusion(j, j) / count;
        }
    }
    return report;
}

} // namespace ams

#endif // AMS_PROJECTION_HPP
